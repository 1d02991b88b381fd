"""Exact ensemble-averaged output states of query circuits.

A query circuit interleaves fixed unitaries on (query register R) x (workspace
S) with queries to an unknown diagonal oracle, forward or inverse. Averaging
the output projector over a diagonal-phase ensemble is done exactly, without
sampling: the run is decomposed over integer exponent histograms e (one count
per diagonal entry, negative after inverse queries), each holding the part of
the state that acquired the monomial ``prod_i U_i^{e_i}``. The ensemble
average is then a moment-weighted double sum over histogram keys,

    rho = sum_{e, e'} M(e - e') |v_e><v_{e'}|,   M(m) = prod_i moment(eps, q, m_i),

which factorizes per coordinate because the diagonal entries are independent.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .biased_fourier import build_biased_frame
from .errors import ConfigError, DimensionError, ParameterError, QuerylabError, ResourceLimitError
from .linalg import DensityMatrix, StateVector, trace_distance
from .phases import MomentTable, pmf_vector

__all__ = [
    "FixedGate",
    "ForwardQuery",
    "InverseQuery",
    "QueryCircuit",
    "PurifiedState",
    "AveragedOutput",
    "RotatedPurification",
    "run_purified",
    "average_density",
    "brute_force_average",
    "distinguishing_advantage",
    "success_probability_bound",
    "biased_ft_rotate",
    "moment_gram",
    "circuit_to_text",
    "circuit_from_text",
    "DEFAULT_KEY_CAP",
]

DEFAULT_KEY_CAP = 500_000


@dataclass(frozen=True)
class FixedGate:
    """A unitary on the full R x S space, stored dense."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"gate must be square, got {m.shape}")
        if np.abs(m @ m.conj().T - np.eye(m.shape[0])).max() > 1e-10:
            raise ParameterError("fixed gate is not unitary within 1e-10")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


class ForwardQuery:
    """Marker step: apply the unknown oracle."""

    def __repr__(self):
        return "ForwardQuery()"


class InverseQuery:
    """Marker step: apply the unknown oracle's inverse."""

    def __repr__(self):
        return "InverseQuery()"


FORWARD = ForwardQuery()
INVERSE = InverseQuery()


@dataclass(frozen=True)
class QueryCircuit:
    """Ordered steps over a dimension-d query register and a workspace."""

    d: int
    aux_dim: int
    steps: tuple

    def __post_init__(self):
        d = int(self.d)
        aux = int(self.aux_dim)
        if d < 1 or aux < 1:
            raise ParameterError(f"register dimensions must be >= 1, got d={d}, aux={aux}")
        steps = tuple(self.steps)
        for s in steps:
            if isinstance(s, FixedGate):
                if s.matrix.shape[0] != d * aux:
                    raise DimensionError(
                        f"gate of dimension {s.matrix.shape[0]} in a circuit of total dimension {d * aux}"
                    )
            elif not isinstance(s, (ForwardQuery, InverseQuery)):
                raise ParameterError(f"unknown step type {type(s)!r}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "aux_dim", aux)
        object.__setattr__(self, "steps", steps)

    @property
    def query_count(self) -> int:
        return sum(isinstance(s, (ForwardQuery, InverseQuery)) for s in self.steps)

    @property
    def forward_count(self) -> int:
        return sum(isinstance(s, ForwardQuery) for s in self.steps)

    @property
    def inverse_count(self) -> int:
        return sum(isinstance(s, InverseQuery) for s in self.steps)

    @property
    def forward_only(self) -> bool:
        return self.inverse_count == 0

    def initial_state(self) -> StateVector:
        amps = np.zeros(self.d * self.aux_dim, dtype=complex)
        amps[0] = 1.0
        return StateVector(amps, (self.d, self.aux_dim))


@dataclass(frozen=True)
class PurifiedState:
    """Sparse map from integer exponent histograms to component vectors."""

    d: int
    aux_dim: int
    components: dict
    forward_count: int
    inverse_count: int

    @property
    def key_count(self) -> int:
        return len(self.components)

    @property
    def query_count(self) -> int:
        return self.forward_count + self.inverse_count

    @property
    def forward_only(self) -> bool:
        return self.inverse_count == 0

    def total_mass(self) -> float:
        return float(sum(np.vdot(v, v).real for v in self.components.values()))

    def validate(self):
        """Assert the histogram invariants; returns self for chaining."""
        if abs(self.total_mass() - 1.0) > 1e-10:
            raise QuerylabError(f"purified mass {self.total_mass()!r} drifted from 1")
        net = self.forward_count - self.inverse_count
        for e in self.components:
            if sum(e) != net:
                raise QuerylabError(f"histogram key {e} does not sum to {net}")
            if self.forward_only and any(x < 0 for x in e):
                raise QuerylabError(f"negative exponent in forward-only key {e}")
        return self


@dataclass(frozen=True)
class AveragedOutput:
    """An ensemble-averaged output density matrix with its noise parameters."""

    density: DensityMatrix
    bias: float
    order: int


def run_purified(circuit: QueryCircuit, initial: StateVector = None,
                 key_cap: int = DEFAULT_KEY_CAP) -> PurifiedState:
    """Evolve the histogram decomposition of a circuit run, exactly.

    Gates act on every component; a forward query splits each component by
    query-register index x and increments that key coordinate (inverse
    queries decrement). Exceeding ``key_cap`` histogram keys raises a
    resource error rather than pruning.
    """
    d, aux = circuit.d, circuit.aux_dim
    if initial is None:
        initial = circuit.initial_state()
    if initial.register_dims != (d, aux):
        raise DimensionError(
            f"initial state dims {initial.register_dims} do not match circuit ({d}, {aux})"
        )
    if not initial.normalized:
        raise ParameterError("purified evolution requires a normalized initial state")
    zero = (0,) * d
    comps = {zero: initial.amplitudes.astype(complex)}
    for step in circuit.steps:
        if isinstance(step, FixedGate):
            keys = list(comps.keys())
            block = np.stack([comps[k] for k in keys])
            block = block @ step.matrix.T
            comps = {k: block[i] for i, k in enumerate(keys)}
        else:
            delta = 1 if isinstance(step, ForwardQuery) else -1
            new = {}
            for e, v in comps.items():
                rows = v.reshape(d, aux)
                for x in range(d):
                    row = rows[x]
                    if not row.any():
                        continue
                    ke = list(e)
                    ke[x] += delta
                    ke = tuple(ke)
                    slot = new.get(ke)
                    if slot is None:
                        slot = np.zeros((d, aux), dtype=complex)
                        new[ke] = slot
                    slot[x] += row
            comps = {k: v.reshape(-1) for k, v in new.items()}
            if len(comps) > key_cap:
                raise ResourceLimitError(
                    f"purified run produced {len(comps)} histogram keys, above the cap {key_cap}"
                )
    return PurifiedState(d, aux, comps, circuit.forward_count, circuit.inverse_count)


@lru_cache(maxsize=64)
def _moment_table(eps: float, q: int, span: int) -> MomentTable:
    return MomentTable(eps, q, span)


def _layout(p: PurifiedState):
    keys = sorted(p.components.keys())
    vecs = np.stack([p.components[k] for k in keys])
    expo = np.array(keys, dtype=np.int64)
    return keys, vecs, expo


def average_density(p: PurifiedState, eps: float, q: int,
                    jobs: int = 1, block: int = 512) -> AveragedOutput:
    """Moment-weighted double sum over histogram keys, in fixed row blocks.

    The weight matrix is never materialized whole: each row block looks the
    per-coordinate exponent differences up in a shared moment table, so the
    cost is O(K^2 d / block) lookups and one small matmul per block. Results
    are bit-identical for any ``jobs`` because partial sums are reduced in
    block order.
    """
    dim = p.d * p.aux_dim
    if not p.components:
        raise QuerylabError("empty purified state")
    keys, vecs, expo = _layout(p)
    span = int(expo.max() - expo.min()) if expo.size else 0
    table = _moment_table(float(eps), int(q), span).values
    conj = vecs.conj()
    nkeys = len(keys)
    starts = list(range(0, nkeys, max(1, int(block))))

    def partial(a: int) -> np.ndarray:
        b = min(a + block, nkeys)
        w = np.ones((b - a, nkeys))
        for i in range(p.d):
            w *= table[(expo[a:b, i, None] - expo[None, :, i]) + span]
        return vecs[a:b].T @ w @ conj

    if jobs and jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            parts = list(pool.map(partial, starts))
    else:
        parts = [partial(a) for a in starts]
    rho = np.zeros((dim, dim), dtype=complex)
    for part in parts:
        rho += part
    rho = (rho + rho.conj().T) / 2
    return AveragedOutput(
        density=DensityMatrix(rho, (p.d, p.aux_dim)), bias=float(eps), order=int(q)
    )


def moment_gram(p: PurifiedState, eps: float, q: int, max_keys: int = 4000) -> tuple:
    """(sorted keys, K x K moment matrix) for a small purified state."""
    keys, _, expo = _layout(p)
    if len(keys) > max_keys:
        raise ResourceLimitError(f"{len(keys)} keys exceed the dense Gram cap {max_keys}")
    span = int(expo.max() - expo.min()) if expo.size else 0
    table = _moment_table(float(eps), int(q), span).values
    gram = np.ones((len(keys), len(keys)))
    for i in range(p.d):
        gram *= table[(expo[:, i, None] - expo[None, :, i]) + span]
    return keys, gram


def _dense_run(circuit: QueryCircuit, phases: np.ndarray, initial: np.ndarray) -> np.ndarray:
    v = initial.copy()
    d, aux = circuit.d, circuit.aux_dim
    for step in circuit.steps:
        if isinstance(step, FixedGate):
            v = step.matrix @ v
        else:
            p = phases if isinstance(step, ForwardQuery) else phases.conj()
            v = (v.reshape(d, aux) * p[:, None]).reshape(-1)
    return v


def brute_force_average(circuit: QueryCircuit, eps: float, q: int,
                        initial: StateVector = None) -> AveragedOutput:
    """Independent oracle: enumerate all q^d diagonal oracles and average.

    Guarded to q^d <= 10^4 enumerated oracles.
    """
    q = int(q)
    if q ** circuit.d > 10**4:
        raise ResourceLimitError(
            f"brute force would enumerate q^d = {q ** circuit.d} oracles (cap 10^4)"
        )
    if initial is None:
        initial = circuit.initial_state()
    if initial.register_dims != (circuit.d, circuit.aux_dim):
        raise DimensionError("initial state does not match circuit registers")
    pmf = pmf_vector(eps, q)
    roots = np.exp(2j * np.pi * np.arange(q) / q)
    dim = circuit.d * circuit.aux_dim
    rho = np.zeros((dim, dim), dtype=complex)
    for assignment in itertools.product(range(q), repeat=circuit.d):
        weight = float(np.prod(pmf[list(assignment)]))
        if weight == 0.0:
            continue
        out = _dense_run(circuit, roots[list(assignment)], initial.amplitudes)
        rho += weight * np.outer(out, out.conj())
    rho = (rho + rho.conj().T) / 2
    return AveragedOutput(DensityMatrix(rho, (circuit.d, circuit.aux_dim)), float(eps), q)


def distinguishing_advantage(circuit: QueryCircuit, eps: float, q: int,
                             initial: StateVector = None, jobs: int = 1,
                             key_cap: int = DEFAULT_KEY_CAP) -> float:
    """Trace distance between the bias-0 and bias-eps averaged outputs.

    The histogram decomposition is bias-independent, so the circuit runs
    once; the two averages can be evaluated concurrently. The implied success
    probability of the best single-shot distinguisher is
    ``1/2 + advantage/2``.
    """
    p = run_purified(circuit, initial, key_cap=key_cap)
    if eps == 0.0:
        return 0.0
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            f0 = pool.submit(average_density, p, 0.0, q)
            f1 = pool.submit(average_density, p, eps, q)
            rho0, rho1 = f0.result(), f1.result()
    else:
        rho0 = average_density(p, 0.0, q)
        rho1 = average_density(p, eps, q)
    return trace_distance(rho0.density, rho1.density)


def success_probability_bound(advantage: float) -> float:
    """Best single-shot success probability implied by a trace-distance gap."""
    return 0.5 + float(advantage) / 2


@dataclass(frozen=True)
class RotatedPurification:
    """Purification re-expressed in the orthonormalized (rounded) label basis."""

    d: int
    aux_dim: int
    bias: float
    order: int
    retained: dict = field(repr=False)
    error_mass: dict = field(repr=False)
    rotated: dict = field(repr=False)

    def density(self) -> DensityMatrix:
        dim = self.d * self.aux_dim
        rho = np.zeros((dim, dim), dtype=complex)
        for w in self.rotated.values():
            rho += np.outer(w, w.conj())
        rho = (rho + rho.conj().T) / 2
        return DensityMatrix(rho, (self.d, self.aux_dim))


def biased_ft_rotate(p: PurifiedState, eps: float, q: int) -> RotatedPurification:
    """Re-express a forward-only purification in the rounded label basis.

    Each histogram key keeps amplitude ``prod_i alpha[e_i]`` on its own label
    and leaks the rest onto lexicographically lower labels; the new labels
    are orthonormal, so tracing them out reproduces the moment-weighted
    average, which is cross-checked here to 1e-9.
    """
    if not p.forward_only:
        raise ParameterError("label rounding is defined for forward-only purifications")
    q = int(q)
    for e in p.components:
        if any(x >= q for x in e):
            raise ParameterError(f"histogram key {e} has an exponent >= q={q}")
    basis = build_biased_frame(q, eps)
    c = basis.coeffs
    alphas = basis.alphas
    retained, error_mass = {}, {}
    rotated = {}
    dim = p.d * p.aux_dim
    for e, v in p.components.items():
        amp = float(np.prod(alphas[list(e)]))
        retained[e] = amp
        error_mass[e] = 1.0 - amp * amp
        for label in itertools.product(*(range(x + 1) for x in e)):
            coef = 1.0 + 0.0j
            for li, ei in zip(label, e):
                coef *= c[li, ei]
            if coef == 0.0:
                continue
            slot = rotated.get(label)
            if slot is None:
                slot = np.zeros(dim, dtype=complex)
                rotated[label] = slot
            slot += coef * v
    out = RotatedPurification(p.d, p.aux_dim, float(eps), q, retained, error_mass, rotated)
    direct = average_density(p, eps, q).density
    if trace_distance(out.density(), direct) > 1e-9:
        raise QuerylabError("rotated purification does not reproduce the moment average")
    return out


def _format_complex(z: complex) -> str:
    return f"{float(z.real)!r},{float(z.imag)!r}"


def _parse_complex(tok: str, line_no: int) -> complex:
    try:
        re_s, im_s = tok.split(",")
        return complex(float(re_s), float(im_s))
    except ValueError as exc:
        raise ConfigError(f"bad complex entry {tok!r}", line=line_no) from exc


def circuit_to_text(circuit: QueryCircuit, q: int) -> str:
    """Line format: header ``d q aux``, then ``G <entries>`` / ``Q+`` / ``Q-``.

    Gate entries are row-major ``re,im`` pairs printed with repr precision,
    so serialization round-trips bit-exactly.
    """
    lines = [f"{circuit.d} {int(q)} {circuit.aux_dim}"]
    for step in circuit.steps:
        if isinstance(step, ForwardQuery):
            lines.append("Q+")
        elif isinstance(step, InverseQuery):
            lines.append("Q-")
        else:
            ent = " ".join(_format_complex(z) for z in step.matrix.reshape(-1))
            lines.append(f"G {ent}")
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> tuple:
    """Parse the line format back into ``(QueryCircuit, q)``."""
    lines = [ln for ln in text.splitlines()]
    if not lines or not lines[0].strip():
        raise ConfigError("empty circuit text", line=1)
    head = lines[0].split()
    if len(head) != 3:
        raise ConfigError(f"header must be 'd q aux', got {lines[0]!r}", line=1)
    try:
        d, q, aux = (int(x) for x in head)
    except ValueError as exc:
        raise ConfigError(f"non-integer header field in {lines[0]!r}", line=1) from exc
    steps = []
    for idx, ln in enumerate(lines[1:], start=2):
        s = ln.strip()
        if not s:
            continue
        if s == "Q+":
            steps.append(FORWARD)
        elif s == "Q-":
            steps.append(INVERSE)
        elif s.startswith("G"):
            toks = s[1:].split()
            dim = d * aux
            if len(toks) != dim * dim:
                raise ConfigError(
                    f"gate line has {len(toks)} entries, expected {dim * dim}", line=idx
                )
            mat = np.array([_parse_complex(t, idx) for t in toks]).reshape(dim, dim)
            steps.append(FixedGate(mat))
        else:
            raise ConfigError(f"unknown step line {s!r}", line=idx)
    return QueryCircuit(d, aux, tuple(steps)), q
