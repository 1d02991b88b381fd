"""Biased distributions over cyclic phases.

The noise model used throughout the package perturbs a uniform distribution
over the order-``q`` roots of unity toward a window of exponents centered on
zero: with ``M = q // 4``, the window is ``{-M, ..., M}`` taken mod ``q``, and
a bias ``eps`` in ``[0, 1]`` moves probability mass from the complement onto
the window. ``eps = 0`` is exactly uniform; ``eps = 1`` is uniform on the
window alone.

All distribution functions work with integer exponents ``k`` in
``{0, ..., q-1}``; the corresponding phase value is ``exp(2j*pi*k/q)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

__all__ = [
    "CyclicPhase",
    "PhaseDistribution",
    "MomentTable",
    "phase_pmf",
    "pmf_vector",
    "phase_mean",
    "phase_moment",
    "sample_phase",
    "sample_exponents",
    "window_halfwidth",
]


def _check_bias(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"bias must lie in [0, 1], got {eps!r}")
    return eps


def _check_order(q: int) -> int:
    q = int(q)
    if q < 2:
        raise ParameterError(f"phase order must be >= 2, got {q!r}")
    return q


def window_halfwidth(q: int) -> int:
    """Half-width M of the favored exponent window for order ``q``."""
    return _check_order(q) // 4


@dataclass(frozen=True)
class CyclicPhase:
    """An exact root of unity, stored as an exponent of order ``q``.

    The exponent is reduced mod ``q`` at construction.
    """

    exponent: int
    order: int

    def __post_init__(self):
        q = _check_order(self.order)
        object.__setattr__(self, "order", q)
        object.__setattr__(self, "exponent", int(self.exponent) % q)

    @property
    def value(self) -> complex:
        return complex(np.exp(2j * np.pi * self.exponent / self.order))

    def __mul__(self, other: "CyclicPhase") -> "CyclicPhase":
        if not isinstance(other, CyclicPhase):
            return NotImplemented
        if other.order != self.order:
            raise ParameterError(
                f"cannot multiply phases of orders {self.order} and {other.order}"
            )
        return CyclicPhase(self.exponent + other.exponent, self.order)

    def inverse(self) -> "CyclicPhase":
        return CyclicPhase(-self.exponent, self.order)


def phase_pmf(eps: float, q: int, k: int) -> float:
    """Probability of exponent ``k`` under the bias-``eps`` distribution."""
    eps = _check_bias(eps)
    q = _check_order(q)
    k = int(k)
    if not 0 <= k < q:
        raise ParameterError(f"exponent must lie in [0, {q}), got {k!r}")
    M = q // 4
    if k <= M or k >= q - M:
        return (1.0 + eps * (q / (2 * M + 1) - 1.0)) / q
    return (1.0 - eps) / q


def pmf_vector(eps: float, q: int) -> np.ndarray:
    """Full pmf over exponents ``0..q-1`` as a float array."""
    eps = _check_bias(eps)
    q = _check_order(q)
    M = q // 4
    out = np.full(q, (1.0 - eps) / q)
    hi = (1.0 + eps * (q / (2 * M + 1) - 1.0)) / q
    out[: M + 1] = hi
    if M > 0:
        out[q - M :] = hi
    return out


@dataclass(frozen=True)
class PhaseDistribution:
    """The bias-``eps`` measure over order-``q`` exponents, pmf materialized."""

    order: int
    bias: float
    pmf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = _check_order(self.order)
        eps = _check_bias(self.bias)
        object.__setattr__(self, "order", q)
        object.__setattr__(self, "bias", eps)
        v = pmf_vector(eps, q)
        v.flags.writeable = False
        object.__setattr__(self, "pmf", v)

    @property
    def mean(self) -> float:
        return phase_mean(self.bias, self.order)

    def moment(self, m: int) -> float:
        return phase_moment(self.bias, self.order, m)

    def sample(self, rng: np.random.Generator) -> CyclicPhase:
        return sample_phase(self.bias, self.order, rng)


def _dirichlet(q: int, m: int) -> float:
    # Normalized Dirichlet kernel sum(w^{km}, k=-M..M) / (2M+1); equals 1 at
    # m = 0 mod q by the removable singularity.
    M = q // 4
    r = m % q
    if r == 0:
        return 1.0
    return float(
        np.sin((2 * M + 1) * np.pi * r / q) / ((2 * M + 1) * np.sin(np.pi * r / q))
    )


def phase_mean(eps: float, q: int) -> float:
    """Mean of the phase value, E[exp(2j*pi*k/q)].

    Real for every (eps, q) because the window is symmetric; equals
    ``eps * sin((2M+1)*pi/q) / ((2M+1)*sin(pi/q))`` with ``M = q // 4``,
    which tends to ``2*eps/pi`` for large ``q``.
    """
    eps = _check_bias(eps)
    q = _check_order(q)
    return eps * _dirichlet(q, 1)


def phase_moment(eps: float, q: int, m: int) -> float:
    """m-th power moment E[exp(2j*pi*k*m/q)] of the bias-``eps`` distribution.

    Exactly 1 when ``m`` is a multiple of ``q``; otherwise the uniform part
    cancels and the value is ``eps`` times a normalized Dirichlet kernel, so
    every off-lattice moment is linear in the bias. The window is symmetric,
    so all moments are real.
    """
    eps = _check_bias(eps)
    q = _check_order(q)
    m = int(m)
    if m % q == 0:
        return 1.0
    return eps * _dirichlet(q, m)


class MomentTable:
    """Precomputed power moments for integer powers ``-max_power..max_power``.

    The averaged-output engine evaluates products of per-coordinate moments
    over large index grids; this table makes each evaluation an array lookup.
    """

    def __init__(self, eps: float, q: int, max_power: int):
        self.eps = _check_bias(eps)
        self.q = _check_order(q)
        max_power = int(max_power)
        if max_power < 0:
            raise ParameterError(f"max_power must be >= 0, got {max_power!r}")
        self.max_power = max_power
        ms = np.arange(-max_power, max_power + 1)
        self._table = np.array([phase_moment(self.eps, self.q, m) for m in ms])
        self._table.flags.writeable = False

    def lookup(self, m) -> np.ndarray:
        """Moments for an integer array ``m`` (any shape), validated against the range."""
        m = np.asarray(m, dtype=np.int64)
        if m.size and (m.min() < -self.max_power or m.max() > self.max_power):
            raise ParameterError(
                f"moment power out of table range [-{self.max_power}, {self.max_power}]"
            )
        return self._table[m + self.max_power]

    @property
    def values(self) -> np.ndarray:
        """The raw table, index ``i`` holding power ``i - max_power``."""
        return self._table


def sample_exponents(eps: float, q: int, rng: np.random.Generator, size=None):
    """Draw exponents from the bias-``eps`` distribution by inverse CDF.

    Uses one uniform draw per sample, so two generators seeded identically
    produce identical exponent streams for any two biases that share a pmf
    (in particular, every kind of draw at ``eps = 0`` matches plain uniform
    sampling draw-for-draw).
    """
    cdf = np.cumsum(pmf_vector(eps, q))
    cdf[-1] = 1.0
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right")
    if size is None:
        return int(out)
    return out.astype(np.int64)


def sample_phase(eps: float, q: int, rng: np.random.Generator) -> CyclicPhase:
    """One draw from the bias-``eps`` distribution, as a CyclicPhase."""
    return CyclicPhase(sample_exponents(eps, q, rng), q)
