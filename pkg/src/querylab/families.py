"""Circuit generators for the separation experiments.

Two families matter:

- the amplification probe family: a trace-probe preparation (Fourier in,
  query, flag-flip on index 0, Fourier out) advanced by Grover-style
  iterates, which consumes inverse queries through the reflection about the
  initial state;
- matched forward-only families at equal (d, aux, n): the all-forward twin of
  the probe circuit plus seeded random interleavings, providing the ceiling
  that the inverse-using family is compared against.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .linalg import dft_matrix, random_unitary
from .query_sim import FORWARD, INVERSE, FixedGate, InverseQuery, QueryCircuit

__all__ = [
    "flag_flip_matrix",
    "grover_iterate_circuit",
    "matched_forward_circuit",
    "random_interleaved_circuit",
    "matched_forward_family",
]


def flag_flip_matrix(d: int, aux: int = 2) -> np.ndarray:
    """Permutation swapping the two flag values on query-register index 0."""
    if aux != 2:
        raise ParameterError("the flag flip is defined for a 2-dimensional flag register")
    z = np.eye(d * aux)
    z[[0, 1]] = z[[1, 0]]
    return z


def _probe_pieces(d: int):
    t = dft_matrix(d)
    eye2 = np.eye(2)
    ti = np.kron(t, eye2)
    tdi = np.kron(t.conj().T, eye2)
    z = flag_flip_matrix(d)
    s_good = np.kron(np.eye(d), np.diag([1.0, -1.0]))
    s_zero = np.eye(2 * d)
    s_zero[0, 0] = -1.0
    return ti, tdi, z, s_good, s_zero


def grover_iterate_circuit(d: int, n: int) -> QueryCircuit:
    """The inverse-using demonstration family at query budget n.

    Builds the probe preparation X (one forward query), then as many full
    iterates X*S0*Xdag*S_good (two queries each, one inverse) as the budget
    allows; an even budget ends after the inverse half of the last iterate.
    Adjacent fixed gates are fused, so the step list stays short.
    """
    n = int(n)
    if n < 1:
        raise ParameterError(f"query budget must be >= 1, got {n!r}")
    ti, tdi, z, s_good, s_zero = _probe_pieces(d)
    steps = [FixedGate(ti), FORWARD, FixedGate(z @ tdi)]
    used = 1
    while used < n:
        if used + 2 <= n:
            steps += [
                FixedGate(ti @ z @ s_good),
                INVERSE,
                FixedGate(ti @ s_zero @ tdi),
                FORWARD,
                FixedGate(z @ tdi),
            ]
            used += 2
        else:
            steps += [FixedGate(ti @ z @ s_good), INVERSE, FixedGate(tdi)]
            used += 1
    return QueryCircuit(d, 2, tuple(steps))


def matched_forward_circuit(d: int, n: int) -> QueryCircuit:
    """The all-forward twin: same gate skeleton, every inverse query forward."""
    base = grover_iterate_circuit(d, n)
    steps = tuple(FORWARD if isinstance(s, InverseQuery) else s for s in base.steps)
    return QueryCircuit(d, 2, steps)


def random_interleaved_circuit(d: int, aux: int, pattern: str, rng) -> QueryCircuit:
    """Haar-random fixed gates around the given query pattern ('+'/'-')."""
    steps = [FixedGate(random_unitary(d * aux, rng))]
    for ch in pattern:
        if ch == "+":
            steps.append(FORWARD)
        elif ch == "-":
            steps.append(INVERSE)
        else:
            raise ParameterError(f"pattern characters must be '+' or '-', got {ch!r}")
        steps.append(FixedGate(random_unitary(d * aux, rng)))
    return QueryCircuit(d, aux, tuple(steps))


def matched_forward_family(d: int, n: int, count: int = 20, seed: int = 0) -> list:
    """The forward twin plus ``count`` seeded random forward circuits.

    All members share (d, aux=2, n); the family's maximum advantage is the
    comparison ceiling for the inverse-using family.
    """
    out = [matched_forward_circuit(d, n)]
    root = np.random.SeedSequence((int(seed), d, n))
    for child in root.spawn(int(count)):
        rng = np.random.default_rng(child)
        out.append(random_interleaved_circuit(d, 2, "+" * n, rng))
    return out
