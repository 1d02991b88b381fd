"""Dense linear algebra over small multi-register complex state spaces.

States are flat complex vectors with an ordered tuple of register dimensions;
the flat index runs in C order over the registers (first register is the most
significant axis). Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, DimensionError, ParameterError

__all__ = [
    "StateVector",
    "DensityMatrix",
    "UnitaryGate",
    "apply_gate",
    "partial_trace",
    "trace_distance",
    "gram_schmidt",
    "povm_measure",
    "dft_matrix",
    "random_unitary",
]

_ATOL = 1e-10


def _as_dims(register_dims) -> tuple:
    try:
        dims = tuple(int(d) for d in register_dims)
    except TypeError:
        dims = (int(register_dims),)
    if not dims or any(d < 1 for d in dims):
        raise DimensionError(f"register dimensions must be positive, got {register_dims!r}")
    return dims


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StateVector:
    """A complex vector over an ordered product of registers.

    ``normalized=False`` admits intermediate, deliberately unnormalized
    vectors; normalized states must have unit norm within 1e-10.
    """

    amplitudes: np.ndarray
    register_dims: tuple
    normalized: bool = True

    def __post_init__(self):
        dims = _as_dims(self.register_dims)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != math.prod(dims):
            raise DimensionError(
                f"amplitude length {amps.size} does not match register dims {dims}"
            )
        if self.normalized and abs(np.linalg.norm(amps) - 1.0) > _ATOL:
            raise ParameterError(
                f"state flagged normalized has norm {np.linalg.norm(amps)!r}"
            )
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "register_dims", dims)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized_copy(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise DegeneracyError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n, self.register_dims)

    def inner(self, other: "StateVector") -> complex:
        if other.register_dims != self.register_dims:
            raise DimensionError("inner product needs matching register layouts")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density_matrix(self) -> "DensityMatrix":
        if not self.normalized:
            raise ParameterError("normalize before forming a density matrix")
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()),
                             self.register_dims)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix over an ordered product of registers."""

    entries: np.ndarray
    register_dims: tuple

    def __post_init__(self):
        dims = _as_dims(self.register_dims)
        m = np.array(self.entries, dtype=complex)
        n = math.prod(dims)
        if m.shape != (n, n):
            raise DimensionError(f"entries shape {m.shape} does not match dims {dims}")
        if np.abs(m - m.conj().T).max() > _ATOL:
            raise ParameterError("density matrix is not Hermitian within 1e-10")
        if abs(np.trace(m).real - 1.0) > _ATOL or abs(np.trace(m).imag) > _ATOL:
            raise ParameterError(f"density matrix trace {np.trace(m)!r} is not 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -_ATOL:
            raise ParameterError("density matrix has an eigenvalue below -1e-10")
        object.__setattr__(self, "entries", _frozen(m))
        object.__setattr__(self, "register_dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class UnitaryGate:
    """A unitary matrix acting on an ordered subset of registers.

    ``targets`` lists register indices in the order the gate's tensor factors
    address them; the gate dimension must equal the product of the targeted
    register dimensions at application time.
    """

    entries: np.ndarray
    targets: tuple = (0,)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"gate must be square, got shape {m.shape}")
        if np.abs(m @ m.conj().T - np.eye(m.shape[0])).max() > _ATOL:
            raise ParameterError("gate is not unitary within 1e-10")
        try:
            targets = tuple(int(t) for t in self.targets)
        except TypeError:
            targets = (int(self.targets),)
        if len(set(targets)) != len(targets):
            raise DimensionError(f"duplicate target registers in {targets!r}")
        object.__setattr__(self, "entries", _frozen(m))
        object.__setattr__(self, "targets", targets)

    def dagger(self) -> "UnitaryGate":
        return UnitaryGate(self.entries.conj().T, self.targets)


def _apply_matrix(amps: np.ndarray, dims: tuple, matrix: np.ndarray, targets: tuple) -> np.ndarray:
    # Applies `matrix` to the targeted axes of the C-ordered register tensor.
    if any(not 0 <= t < len(dims) for t in targets):
        raise DimensionError(f"targets {targets!r} out of range for {len(dims)} registers")
    sub = math.prod(dims[t] for t in targets)
    if matrix.shape[0] != sub:
        raise DimensionError(
            f"gate dimension {matrix.shape[0]} does not match targeted dims {targets!r} of {dims}"
        )
    psi = amps.reshape(dims)
    psi = np.moveaxis(psi, targets, range(len(targets)))
    kept_shape = psi.shape[len(targets):]
    out = matrix @ psi.reshape(sub, -1)
    out = out.reshape(tuple(dims[t] for t in targets) + kept_shape)
    out = np.moveaxis(out, range(len(targets)), targets)
    return out.reshape(-1)


def apply_gate(state: StateVector, gate: UnitaryGate) -> StateVector:
    """Apply a unitary to its target registers; norm is preserved."""
    out = _apply_matrix(state.amplitudes, state.register_dims, gate.entries, gate.targets)
    return StateVector(out, state.register_dims, normalized=state.normalized)


def partial_trace(rho: DensityMatrix, register) -> DensityMatrix:
    """Trace out one register (or several, given a sequence of indices)."""
    try:
        drop = sorted({int(r) for r in register})
    except TypeError:
        drop = [int(register)]
    dims = rho.register_dims
    if any(not 0 <= r < len(dims) for r in drop):
        raise DimensionError(f"register index {register!r} out of range for dims {dims}")
    if len(drop) == len(dims):
        raise DimensionError("cannot trace out every register")
    keep = [i for i in range(len(dims)) if i not in drop]
    t = rho.entries.reshape(dims + dims)
    # contract each dropped axis with its primed partner, highest index first
    for off, r in enumerate(reversed(drop)):
        nd = len(dims) - off
        t = np.trace(t, axis1=r, axis2=r + nd)
    kept_dims = tuple(dims[i] for i in keep)
    n = math.prod(kept_dims)
    return DensityMatrix(t.reshape(n, n), kept_dims)


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of the Hermitian difference of two density matrices."""
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    b = sigma.entries if isinstance(sigma, DensityMatrix) else np.asarray(sigma, dtype=complex)
    if a.shape != b.shape:
        raise DimensionError(f"trace distance needs equal shapes, got {a.shape} vs {b.shape}")
    diff = a - b
    diff = (diff + diff.conj().T) / 2
    return float(np.abs(np.linalg.eigvalsh(diff)).sum() / 2)


def gram_schmidt(columns) -> list:
    """Orthonormalize an ordered, linearly independent family of vectors.

    The k-th output lies in the span of the first k inputs and has a real,
    positive overlap with the k-th input. A residual below 1e-8 raises a
    degeneracy error.
    """
    if isinstance(columns, np.ndarray) and columns.ndim == 2:
        a = np.array(columns, dtype=complex)
    else:
        a = np.stack([np.asarray(c, dtype=complex).reshape(-1) for c in columns], axis=1)
    dim, k = a.shape
    if k > dim:
        raise DegeneracyError(f"{k} vectors in dimension {dim} cannot be independent")
    qmat, r = np.linalg.qr(a, mode="reduced")
    diag = np.diagonal(r).copy()
    if np.abs(diag).min() < 1e-8:
        raise DegeneracyError(
            f"residual norm {np.abs(diag).min():.3e} below 1e-8; family is numerically degenerate"
        )
    phase = diag / np.abs(diag)
    qmat = qmat * phase.conj()  # makes <out_k, in_k> = |r_kk| > 0
    return [qmat[:, i].copy() for i in range(k)]


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    if w.min() < -_ATOL:
        raise ParameterError("POVM element has an eigenvalue below -1e-10")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def povm_measure(state: StateVector, elements, register: int = 0):
    """Measure one register with a POVM.

    Returns ``(probabilities, post_states)``: outcome probabilities and the
    normalized post-measurement states under the canonical square-root
    instrument, with ``None`` in place of probability-(~0) outcomes.
    """
    if not state.normalized:
        raise ParameterError("measurement requires a normalized state")
    dims = state.register_dims
    register = int(register)
    if not 0 <= register < len(dims):
        raise DimensionError(f"register {register} out of range for dims {dims}")
    d = dims[register]
    mats = [np.asarray(e, dtype=complex) for e in elements]
    if any(m.shape != (d, d) for m in mats):
        raise DimensionError(f"POVM elements must be {d}x{d} for register {register}")
    total = sum(mats)
    if np.abs(total - np.eye(d)).max() > _ATOL:
        raise ParameterError("POVM elements do not sum to the identity within 1e-10")
    probs = np.empty(len(mats))
    posts = []
    for i, m in enumerate(mats):
        branch = _apply_matrix(state.amplitudes, dims, _psd_sqrt(m), (register,))
        p = float(np.vdot(branch, branch).real)
        probs[i] = p
        if p > 1e-14:
            posts.append(StateVector(branch / math.sqrt(p), dims))
        else:
            posts.append(None)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return probs, posts


def dft_matrix(d: int) -> np.ndarray:
    """The d-dimensional discrete Fourier transform; column 0 is uniform."""
    d = int(d)
    if d < 1:
        raise ParameterError(f"DFT dimension must be >= 1, got {d!r}")
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    qmat, r = np.linalg.qr(z)
    return qmat * (np.diagonal(r) / np.abs(np.diagonal(r)))
