"""Standard-normal special functions, truncated-normal moments and entropies.

Everything here works on the *standard* normal; callers divide by sigma first.
Entropies are in bits.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
DEGENERATE_MASS = 1e-15


@dataclass(frozen=True)
class GaussianSource:
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class TruncatedMoments:
    """Mass, mean and variance of N(0, 1) restricted to an interval.

    ``mean`` and ``variance`` are NaN when ``degenerate`` is set (mass below
    1e-15); treat such an interval as an empty cell.
    """

    mass: float
    mean: float
    variance: float
    degenerate: bool = False

    @property
    def second_moment(self):
        """``mass * E[X^2 | cell]``; zero for a degenerate cell."""
        if self.degenerate:
            return 0.0
        return self.mass * (self.variance + self.mean * self.mean)


@dataclass(frozen=True)
class RdPoint:
    rate: float
    distortion: float

    def __iter__(self):
        yield self.rate
        yield self.distortion


def std_pdf(z):
    z = np.asarray(z, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return out.item() if out.ndim == 0 else out


def std_cdf(z):
    """Phi(z) via the complementary error function (scipy's ndtr)."""
    out = special.ndtr(np.asarray(z, dtype=float))
    return out.item() if out.ndim == 0 else out


def std_cdf_inv(p):
    """Inverse of ``std_cdf`` on (0, 1), refined by one Newton step."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"std_cdf_inv needs 0 < p < 1, got {p}")
    z = float(special.ndtri(p))
    # Newton polish; ndtri is already ~1e-16 relative, this guards the tails
    dens = std_pdf(z)
    if dens > 0:
        z -= (std_cdf(z) - p) / dens
    return z


def _phi_times(z):
    """``z * phi(z)`` with the infinite endpoints mapped to 0."""
    if math.isinf(z):
        return 0.0
    return z * std_pdf(z)


def _interval_mass(a, b):
    # difference of tails on the far side keeps precision for intervals in a tail
    if a >= 0:
        return std_cdf(-a) - std_cdf(-b)
    return std_cdf(b) - std_cdf(a)


def truncated_moments(a, b):
    """Moments of the standard normal restricted to ``(a, b)``.

    >>> m = truncated_moments(0.0, math.inf)
    >>> round(m.mean, 7), round(m.variance, 7)
    (0.7978846, 0.3633802)
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise ValueError(f"truncated_moments needs a < b, got ({a}, {b})")
    mass = _interval_mass(a, b)
    if mass < DEGENERATE_MASS:
        return TruncatedMoments(max(mass, 0.0), math.nan, math.nan, degenerate=True)
    pa = 0.0 if math.isinf(a) else std_pdf(a)
    pb = 0.0 if math.isinf(b) else std_pdf(b)
    mean = (pa - pb) / mass
    variance = 1.0 + (_phi_times(a) - _phi_times(b)) / mass - mean * mean
    return TruncatedMoments(mass, mean, max(variance, 0.0))


def binary_entropy(p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    q = 1.0 - p
    # symmetric in p <-> 1-p bit for bit: sum the two terms in a fixed order
    lo, hi = min(p, q), max(p, q)
    return -(lo * math.log2(lo)) - hi * math.log2(hi)


def discrete_entropy(probs):
    """Shannon entropy in bits of a probability vector; zeros contribute 0."""
    p = np.asarray(probs, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("empty probability vector")
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def shannon_rate(distortion_normalized):
    """R(D) = 1/2 log2(1/d) bits for normalized distortion d in (0, 1], else 0."""
    d = float(distortion_normalized)
    if not d > 0:
        raise ValueError(f"distortion must be positive, got {d}")
    if d >= 1.0:
        return 0.0
    return 0.5 * math.log2(1.0 / d)


def shannon_distortion(rate):
    r = float(rate)
    if r < 0:
        raise ValueError(f"rate must be non-negative, got {r}")
    return 2.0 ** (-2.0 * r)
