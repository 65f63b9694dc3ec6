"""Entropy-constrained scalar quantizer design for N(0, 1) (Lagrangian Lloyd-Max).

The cost minimized is ``J = D + lambda * H`` with H in bits, so the threshold
update uses log2 as well.  Design is exact: every cell integral is a truncated
normal moment, no sampling is involved.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .gauss import RdPoint, discrete_entropy, std_cdf_inv, truncated_moments

log = logging.getLogger(__name__)

EMPTY_CELL_MASS = 1e-12


class LloydMaxDivergence(ArithmeticError):
    """Raised when the cost turns non-finite; carries the iteration trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class ScalarQuantizerSpec:
    thresholds: np.ndarray
    recon_points: np.ndarray
    cell_probs: np.ndarray
    # how lloyd_max stopped: "converged", "max_iter" or "given"
    stop_reason: str = "given"
    iterations: int = 0

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float).ravel()
        self.recon_points = np.asarray(self.recon_points, dtype=float).ravel()
        self.cell_probs = np.asarray(self.cell_probs, dtype=float).ravel()

    @property
    def levels(self):
        return len(self.recon_points)

    @property
    def edges(self):
        return np.concatenate(([-np.inf], self.thresholds, [np.inf]))

    @classmethod
    def from_thresholds(cls, thresholds, recon_points=None):
        """Build a spec from thresholds; recon points default to cell centroids."""
        edges = np.concatenate(([-np.inf], np.asarray(thresholds, dtype=float), [np.inf]))
        cells = [truncated_moments(a, b) for a, b in zip(edges[:-1], edges[1:])]
        probs = np.array([c.mass for c in cells])
        if recon_points is None:
            recon_points = [c.mean for c in cells]
        return cls(thresholds, recon_points, probs)

    def validate(self, tol=1e-9):
        t, s, p = self.thresholds, self.recon_points, self.cell_probs
        if len(s) != len(t) + 1 or len(p) != len(s):
            raise ValueError("need M recon points, M probabilities and M-1 thresholds")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if np.any(np.diff(s) <= 0):
            raise ValueError("reconstruction points must be strictly increasing")
        e = self.edges
        if np.any(s < e[:-1]) or np.any(s > e[1:]):
            raise ValueError("each reconstruction point must lie inside its cell")
        if abs(p.sum() - 1.0) > tol:
            raise ValueError("cell probabilities must sum to 1")
        exact = np.array([truncated_moments(a, b).mass for a, b in zip(e[:-1], e[1:])])
        if np.max(np.abs(exact - p)) > tol:
            raise ValueError("cell probabilities disagree with the Gaussian cell masses")
        return self

    def to_dict(self):
        return {
            "thresholds": self.thresholds.tolist(),
            "recon_points": self.recon_points.tolist(),
            "cell_probs": self.cell_probs.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["thresholds"], doc["recon_points"], doc["cell_probs"]).validate()


def scaled_sign_spec():
    return ScalarQuantizerSpec.from_thresholds([0.0])


@dataclass
class LloydMaxConfig:
    M: int
    lam: float = 0.0
    tol: float = 1e-10
    max_iter: int = 10_000
    init: object = "quantile"  # "quantile", ("random", seed) or an explicit array
    # extra stop guard: largest coordinate move per iteration
    step_tol: float = 1e-12
    trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if int(self.M) < 1:
            raise ValueError("M must be >= 1")
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")


def initial_points(M, init="quantile"):
    if isinstance(init, str) and init == "quantile":
        return np.array([std_cdf_inv((m + 0.5) / M) for m in range(M)])
    if isinstance(init, tuple) and init[0] == "random":
        rng = np.random.default_rng(init[1])
        pts = np.sort(rng.standard_normal(M))
        while np.any(np.diff(pts) <= 0):
            pts = np.sort(rng.standard_normal(M))
        return pts
    pts = np.sort(np.asarray(init, dtype=float).ravel())
    if len(pts) != M or np.any(np.diff(pts) <= 0):
        raise ValueError("explicit init must hold M distinct values")
    return pts


def _threshold_update(s, p, lam):
    """Lagrangian-shifted midpoints between adjacent reconstruction points."""
    mid = 0.5 * (s[:-1] + s[1:])
    if lam == 0:
        return mid
    logs = np.log2(p)
    return mid - lam * (logs[:-1] - logs[1:]) / (2.0 * (s[:-1] - s[1:]))


def _cells(thresholds):
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    cells = [truncated_moments(a, b) for a, b in zip(edges[:-1], edges[1:])]
    return cells


def _cost(cells, s, lam):
    dist = 0.0
    probs = []
    for c, sm in zip(cells, s):
        if c.degenerate:
            probs.append(max(c.mass, 0.0))
            continue
        dist += c.mass * (c.variance + (c.mean - sm) ** 2)
        probs.append(c.mass)
    probs = np.array(probs)
    rate = _entropy_unchecked(probs)
    return dist + lam * rate, dist, rate


def _entropy_unchecked(p):
    p = p / p.sum()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def lloyd_max(config):
    """Run the Lagrangian Lloyd-Max iteration described by ``config``.

    Each pass moves the thresholds to the Lagrangian-shifted midpoints of the
    current reconstruction points, then resets every point to its cell
    centroid and every probability to its cell mass.  Cells whose mass drops
    below 1e-12 are removed, so the result may have fewer than ``config.M``
    levels.
    """
    M = int(config.M)
    lam = float(config.lam)
    trace = config.trace
    trace.clear()
    if M == 1:
        return ScalarQuantizerSpec([], [0.0], [1.0], "converged", 0)

    s = initial_points(M, config.init)
    p = np.full(M, 1.0 / M)
    t = None
    prev_j = None
    reason = "max_iter"
    it = 0
    while it < int(config.max_iter):
        it += 1
        t_new = _threshold_update(s, p, lam)
        t_new = t_new if t is None or len(t) != len(t_new) else _damped(t, t_new)
        cells = _cells(t_new)
        alive = np.array([not c.degenerate and c.mass >= EMPTY_CELL_MASS for c in cells])
        if not alive.all():
            log.debug("iteration %d: dropping %d empty cell(s)", it, int((~alive).sum()))
            s = s[alive]
            p = p[alive] / p[alive].sum()
            t, prev_j = None, None
            if len(s) == 1:
                t_new = np.array([])
                cells = _cells(t_new)
            else:
                continue
        s_new = np.array([c.mean for c in cells])
        p_new = np.array([c.mass for c in cells])
        j, dist, rate = _cost(cells, s_new, lam)
        trace.append((it, j, dist, rate, len(s_new)))
        if not math.isfinite(j):
            raise LloydMaxDivergence(f"non-finite cost at iteration {it}", trace)
        step = float(np.max(np.abs(s_new - s)))
        if t is not None and len(t):
            step = max(step, float(np.max(np.abs(t_new - t))))
        elif len(t_new):
            step = np.inf
        s, p, t = s_new, p_new, t_new
        if len(s) == 1:
            reason = "converged"
            break
        if prev_j is not None and abs(prev_j - j) <= config.tol * abs(j) and step <= config.step_tol:
            reason = "converged"
            break
        prev_j = j
    if reason == "max_iter":
        log.warning("lloyd_max hit max_iter=%d (M=%d, lambda=%g)", config.max_iter, M, lam)
    return ScalarQuantizerSpec(t, s, p, reason, it)


def _damped(t_old, t_new):
    """Halve the step toward ``t_new`` until thresholds stay strictly increasing."""
    cand = t_new
    for _ in range(60):
        if np.all(np.isfinite(cand)) and np.all(np.diff(cand) > 0):
            return cand
        cand = 0.5 * (cand + t_old)
    return t_old


def eval_scalar(spec):
    """Exact (rate, distortion) of a scalar quantizer on N(0, 1)."""
    cells = _cells(spec.thresholds)
    dist = 0.0
    for c, sm in zip(cells, spec.recon_points):
        if not c.degenerate:
            dist += c.mass * (c.variance + (c.mean - sm) ** 2)
    rate = discrete_entropy(_normalize(spec.cell_probs))
    return RdPoint(rate, dist)


def _normalize(p):
    p = np.asarray(p, dtype=float)
    return p / p.sum()


def lagrangian_cost(spec, lam):
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    rate, dist = eval_scalar(spec)
    return dist + lam * rate


def apply_scalar(spec, x):
    """Cell index and reconstruction for ``x`` (scalar or array); ties go right."""
    arr = np.asarray(x, dtype=float)
    idx = _accel.bin_values(arr.ravel(), spec.thresholds).reshape(arr.shape)
    recon = spec.recon_points[idx]
    if arr.ndim == 0:
        return int(idx), float(recon)
    return idx, recon


def sweep_lambda(M, lambda_grid, tol=1e-10, max_iter=10_000):
    """Design one quantizer per lambda, warm-starting from the previous design."""
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    out = []
    init = "quantile"
    for lam in grid:
        levels = M if isinstance(init, str) else len(init)
        spec = lloyd_max(LloydMaxConfig(levels, lam, tol, max_iter, init=init))
        out.append((lam, eval_scalar(spec)))
        init = spec.recon_points if spec.levels > 1 else "quantile"
        if spec.levels == 1:
            M = 1
    return out
