"""Closed-form rate and distortion of the gradient quantizers on a Gaussian source.

All distortions are normalized by sigma^2, boundaries ``beta`` are in units of
sigma, and rates are bits per component.
"""
import math
from dataclasses import dataclass

import numpy as np

from .gauss import RdPoint, binary_entropy, std_cdf, std_pdf

SCALED_SIGN_DISTORTION = (math.pi - 2.0) / math.pi
BETA_BRACKET = (0.0, 8.0)


@dataclass(frozen=True)
class SchemeId:
    """One of ``scaled-sign``, ``asym-binary``, ``topk-bbit`` (with ``b``), ``topk-ternary``."""

    tag: str
    b: int = 0

    TAGS = ("scaled-sign", "asym-binary", "topk-bbit", "topk-ternary")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown scheme {self.tag!r}; expected one of {self.TAGS}")
        if self.tag == "topk-bbit" and self.b < 1:
            raise ValueError("topk-bbit needs b >= 1")

    @classmethod
    def topk_bbit(cls, b):
        return cls("topk-bbit", int(b))

    def __str__(self):
        return f"topk-{self.b}bit" if self.tag == "topk-bbit" else self.tag


@dataclass(frozen=True)
class SchemePoint:
    beta: float
    point: RdPoint


def scaled_sign_point():
    return RdPoint(1.0, SCALED_SIGN_DISTORTION)


def asym_h(beta):
    """Distortion contributed by the lower cell ``(-inf, beta)`` of a binary quantizer.

    Equals ``Phi(beta) * Var(X | X < beta)``; written as
    ``(1 - beta*r - r^2) * Phi(beta)`` with ``r = phi(beta)/Phi(beta)``.
    """
    beta = float(beta)
    cdf = std_cdf(beta)
    if cdf == 0.0:
        return 0.0
    r = std_pdf(beta) / cdf
    return (1.0 - beta * r - r * r) * cdf


def _asym_distortion(beta):
    return asym_h(beta) + asym_h(-beta)


def asym_binary_point(beta):
    beta = float(beta)
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")
    b = abs(beta)  # the point is even in beta; evaluate one branch for exact symmetry
    return RdPoint(binary_entropy(std_cdf(b)), _asym_distortion(b))


def asym_binary_rate_for_distortion(d_normalized, tol=1e-12):
    """Boundary ``beta >= 0`` reaching distortion ``d`` exactly, and the resulting rate.

    Bisection on [0, 8]; the binary distortion is increasing in beta there.
    """
    d = float(d_normalized)
    if not SCALED_SIGN_DISTORTION - 1e-15 <= d < 1.0:
        raise ValueError(
            f"distortion {d} not reachable by the asymmetric binary quantizer "
            f"(needs {SCALED_SIGN_DISTORTION:.7f} <= D < 1)"
        )
    lo, hi = BETA_BRACKET
    if d <= SCALED_SIGN_DISTORTION:
        return 0.0, 1.0
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _asym_distortion(mid) < d:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    return beta, binary_entropy(std_cdf(beta))


def _check_beta(beta):
    beta = float(beta)
    if not beta >= 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    return beta


def topk_bbit_point(beta, b):
    """Threshold sparsifier keeping ``|x| >= beta`` at ``b`` bits (value error ignored)."""
    beta = _check_beta(beta)
    if int(b) < 1:
        raise ValueError("b must be a positive integer")
    if math.isinf(beta):
        return RdPoint(0.0, 1.0)
    keep = 2.0 * std_cdf(-beta)
    rate = binary_entropy(keep) + keep * int(b)
    inner = 1.0 - keep  # 2*Phi(beta) - 1, computed from the tail for precision
    distortion = inner - 2.0 * beta * std_pdf(beta)
    return RdPoint(rate, max(distortion, 0.0))


def topk_ternary_point(beta):
    """Three cells ``(-inf,-beta) | [-beta,beta] | (beta,inf)`` with centroid reconstruction."""
    beta = _check_beta(beta)
    if math.isinf(beta):
        return RdPoint(0.0, 1.0)
    p1 = std_cdf(-beta)
    p0 = 1.0 - 2.0 * p1
    dens = std_pdf(beta)
    rate = 0.0
    distortion = 0.0
    if p1 > 0:
        r = dens / p1
        rate -= 2.0 * p1 * math.log2(p1)
        distortion += 2.0 * (1.0 + beta * r - r * r) * p1
    if p0 > 0:
        rate -= p0 * math.log2(p0)
        distortion += p0 - 2.0 * beta * dens
    return RdPoint(rate, max(distortion, 0.0))


def default_beta_grid(n=400, lo=1e-3, hi=6.0):
    return np.geomspace(lo, hi, n)


def sweep_scheme(scheme, beta_grid):
    """Evaluate ``scheme`` at each grid value, in grid order."""
    if isinstance(scheme, str):
        scheme = SchemeId(scheme)
    grid = [float(g) for g in beta_grid]
    if not grid:
        raise ValueError("beta grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("beta grid must be sorted ascending")
    if scheme.tag == "scaled-sign":
        return [SchemePoint(0.0, scaled_sign_point())]
    if scheme.tag == "asym-binary":
        fn = asym_binary_point
    elif scheme.tag == "topk-bbit":
        def fn(beta):
            return topk_bbit_point(beta, scheme.b)
    else:
        fn = topk_ternary_point
    return [SchemePoint(beta, fn(beta)) for beta in grid]
