"""Entropy-constrained vector quantization trained on samples (Chou-Lookabaugh-Gray).

The per-sample assignment cost is ``||x - s_m||^2 - lam * log2(p_m)``; the
training objective is the sample average of that cost, i.e. total squared
error per vector plus ``lam`` times the codeword entropy in bits.  Reported
rates and distortions are per component.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .ecsq import LloydMaxConfig, apply_scalar, lloyd_max
from .gauss import RdPoint, discrete_entropy

log = logging.getLogger(__name__)


class TrainingDivergence(ArithmeticError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class SampleSet:
    data: np.ndarray
    seed: int = 0

    @property
    def N(self):
        return self.data.shape[1]

    @property
    def count(self):
        return self.data.shape[0]


@dataclass
class VectorCodebook:
    points: np.ndarray
    probs: np.ndarray
    lam: float
    # diagnostics from training
    iterations: int = 0
    stop_reason: str = ""
    cost_trace: list = field(default_factory=list, repr=False)

    @property
    def N(self):
        return self.points.shape[1]

    @property
    def M(self):
        return self.points.shape[0]

    @property
    def empty_cells(self):
        return int(np.sum(self.probs == 0))

    def to_dict(self):
        return {
            "n": int(self.N),
            "lambda": float(self.lam),
            "points": self.points.tolist(),
            "probs": self.probs.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        pts = np.asarray(doc["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != int(doc["n"]):
            raise ValueError("codebook points do not match the declared dimension")
        return cls(pts, np.asarray(doc["probs"], dtype=float), float(doc["lambda"]))


def sample_gaussian(N, count, seed):
    if N < 1 or count < 1:
        raise ValueError("N and count must be positive")
    rng = np.random.default_rng(seed)
    return SampleSet(rng.standard_normal((count, N)), seed)


def _penalty(probs, lam):
    probs = np.asarray(probs, dtype=float)
    if lam == 0:
        # pure k-means: probabilities play no role, empty cells stay reachable
        return np.zeros(len(probs))
    with np.errstate(divide="ignore"):
        return np.where(probs > 0, -lam * np.log2(np.where(probs > 0, probs, 1.0)), np.inf)


def clg_assign(points, probs, lam, x, backend=None):
    """Index minimizing the CLG cost for one vector or a batch of vectors.

    Zero-probability cells cost +inf when ``lam > 0``; ties go to the lowest
    index.
    """
    probs = np.asarray(probs, dtype=float)
    if not np.any(probs > 0):
        raise ValueError("at least one cell needs positive probability")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    arr = np.asarray(x, dtype=float)
    batch = np.atleast_2d(arr)
    if batch.shape[1] != points.shape[1]:
        raise ValueError("dimension mismatch between samples and codebook")
    idx, _ = _accel.assign_min_cost(batch, points, _penalty(probs, lam), backend)
    return int(idx[0]) if arr.ndim <= 1 else idx


def init_codebook(samples, M, init_seed):
    """M distinct sample vectors picked by ``init_seed``."""
    rng = np.random.default_rng(init_seed)
    data = samples.data
    order = rng.permutation(samples.count)
    chosen = []
    seen = set()
    for k in order:
        key = data[k].tobytes()
        if key not in seen:
            seen.add(key)
            chosen.append(k)
            if len(chosen) == M:
                break
    if len(chosen) < M:
        raise ValueError(f"only {len(chosen)} distinct samples available for M={M}")
    return data[np.array(chosen)].copy()


def clg_train(samples, M, lam, tol=1e-10, max_iter=500, init_seed=0, restarts=1,
              init_points=None, backend=None):
    """Train an M-point entropy-constrained codebook on ``samples``.

    With ``restarts > 1`` the codebook with the lowest final cost over seeds
    ``init_seed, init_seed+1, ...`` is returned.
    """
    if M < 1 or samples.count < M:
        raise ValueError("need 1 <= M <= sample count")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    best = None
    for r in range(max(1, int(restarts))):
        pts = init_points if init_points is not None and r == 0 else init_codebook(samples, M, init_seed + r)
        cb = _train_once(samples.data, np.array(pts, dtype=float), float(lam), tol, max_iter, backend)
        if best is None or cb.cost_trace[-1] < best.cost_trace[-1]:
            best = cb
    return best


def _train_once(x, points, lam, tol, max_iter, backend):
    n = x.shape[0]
    M = points.shape[0]
    probs = np.full(M, 1.0 / M)
    prev_idx = None
    trace = []
    reason = "max_iter"
    it = 0
    for it in range(1, int(max_iter) + 1):
        idx, cost = _accel.assign_min_cost(x, points, _penalty(probs, lam), backend)
        j = float(cost.mean())
        trace.append(j)
        if not math.isfinite(j):
            raise TrainingDivergence(f"non-finite cost at iteration {it}", trace)
        sums, counts = _accel.centroid_sums(x, idx, M, backend)
        live = counts > 0
        points[live] = sums[live] / counts[live, None]
        if lam == 0 and not live.all():
            # k-means practice: move each empty cell onto the worst-served sample
            err = _accel.squared_distances(x, points, idx, backend)
            for m in np.flatnonzero(~live):
                far = int(np.argmax(err))
                points[m] = x[far]
                err[far] = -1.0
        probs = counts / n
        if prev_idx is not None and np.array_equal(idx, prev_idx):
            reason = "stable"
            break
        if len(trace) > 1 and abs(trace[-2] - j) <= tol * abs(j):
            reason = "converged"
            break
        prev_idx = idx
    if reason == "max_iter":
        log.warning("clg_train hit max_iter=%d (M=%d, lambda=%g)", max_iter, M, lam)
    # points are the centroids of the last partition and probs its frequencies
    sq = _accel.squared_distances(x, points, idx, backend)
    trace.append(float(sq.mean()) + lam * _entropy(probs))
    return VectorCodebook(points, probs, lam, it, reason, trace)


def _entropy(p):
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def assign_samples(codebook, samples, backend=None):
    if samples.N != codebook.N:
        raise ValueError(f"codebook has N={codebook.N}, samples have N={samples.N}")
    return clg_assign(codebook.points, codebook.probs, codebook.lam, samples.data, backend)


def eval_codebook(codebook, samples, backend=None):
    """Per-component (rate, distortion) of ``codebook`` on ``samples``."""
    idx = assign_samples(codebook, samples, backend)
    sq = _accel.squared_distances(samples.data, codebook.points, idx, backend)
    N = codebook.N
    p = np.asarray(codebook.probs, dtype=float)
    rate = discrete_entropy(p / p.sum()) / N
    return RdPoint(rate, float(sq.sum() / (samples.count * N)))


def product_quantizer_eval(spec, samples):
    """Apply a scalar quantizer to every coordinate; per-component empirical (rate, distortion)."""
    flat = samples.data.ravel()
    idx, recon = apply_scalar(spec, flat)
    counts = np.bincount(idx, minlength=spec.levels)
    err = flat - recon
    return RdPoint(discrete_entropy(counts / counts.sum()), float(np.mean(err * err)))


@dataclass
class AssignmentTable:
    cells: np.ndarray
    counts: np.ndarray

    def rows(self):
        return enumerate(self.cells.tolist())


def export_assignments(codebook, samples, backend=None):
    idx = assign_samples(codebook, samples, backend)
    return AssignmentTable(idx, np.bincount(idx, minlength=codebook.M))


# --------------------------------------------------------------------------
# matched-distortion tuning and the scalar/vector comparison
# --------------------------------------------------------------------------

@dataclass
class TunedResult:
    lam: float
    point: RdPoint
    hit: bool
    model: object


def _bisect_lambda(evaluate, target, lo, hi, tolerance, max_steps):
    """Bisection on lambda for ``evaluate(lam).distortion == target``.

    Empirical distortion is nondecreasing in lambda up to sampling noise and
    may jump when a cell dies, so the closest iterate is kept.
    """
    best = None
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        point, model = evaluate(mid)
        gap = point.distortion - target
        if best is None or abs(gap) < abs(best.point.distortion - target):
            best = TunedResult(mid, point, abs(gap) <= tolerance, model)
        if abs(gap) <= tolerance:
            break
        if gap < 0:
            lo = mid
        else:
            hi = mid
    return best


def tune_clg(samples, M, target, init_seed=0, tolerance=5e-4, lam_range=(0.0, 2.0),
             max_steps=40, restarts=1, backend=None):
    """Lambda for which the CLG codebook's per-component distortion is ``target``."""
    init = init_codebook(samples, M, init_seed)

    def evaluate(lam):
        cb = clg_train(samples, M, lam, init_points=init, restarts=restarts,
                       init_seed=init_seed, backend=backend)
        return eval_codebook(cb, samples, backend), cb

    return _bisect_lambda(evaluate, target, *lam_range, tolerance, max_steps)


def tune_product_lloyd_max(samples, M, target, tolerance=5e-4, lam_range=(0.0, 2.0),
                           max_steps=60):
    """Lambda for which the product Lloyd-Max quantizer reaches ``target`` per component."""

    def evaluate(lam):
        spec = lloyd_max(LloydMaxConfig(M, lam))
        return product_quantizer_eval(spec, samples), spec

    return _bisect_lambda(evaluate, target, *lam_range, tolerance, max_steps)


@dataclass
class Comparison:
    reading: str
    target: float
    lloyd_max: TunedResult
    clg: TunedResult

    @property
    def clg_lower(self):
        return self.clg.point.rate < self.lloyd_max.point.rate


def compare_scalar_vector(samples, clg_M=9, scalar_M=3, reading="per-component",
                          init_seed=0, tolerance=5e-4, restarts=1, backend=None):
    """Match CLG and product Lloyd-Max to one distortion and compare their entropies.

    ``reading`` selects how the figure of 0.6 is interpreted: "per-component"
    (0.6 per coordinate) or "total" (0.6 summed over the N=2 coordinates).
    """
    if reading == "per-component":
        target = 0.6
    elif reading == "total":
        target = 0.6 / samples.N
    else:
        raise ValueError("reading must be 'per-component' or 'total'")
    lm = tune_product_lloyd_max(samples, scalar_M, target, tolerance)
    vq = tune_clg(samples, clg_M, target, init_seed, tolerance, restarts=restarts, backend=backend)
    return Comparison(reading, target, lm, vq)


# --------------------------------------------------------------------------
# rate-distortion sweeps with automatic codebook size
# --------------------------------------------------------------------------

def default_lambda_grid(n=24, lo=0.2, hi=1.0):
    return np.geomspace(lo, hi, n)


def clg_auto_grow(samples, lam, M_start=None, M_max=256, init_seed=0, init_points=None,
                  backend=None):
    """Train with growing M until at least one cell ends up empty (or ``M_max``).

    Each doubling restarts from the previous codebook plus fresh sample
    points; ``init_points`` (of length ``M_start``) warm-starts the first
    training run.
    """
    M = M_start or (2 ** samples.N + 1)
    M = min(M, M_max, samples.count)
    pts = init_points if init_points is not None and len(init_points) == M else None
    while True:
        cb = clg_train(samples, M, lam, init_seed=init_seed, init_points=pts, backend=backend)
        if cb.empty_cells > 0 or M >= M_max:
            return cb
        grown = min(2 * M, M_max, samples.count)
        fresh = init_codebook(samples, grown - M, init_seed + M)
        pts = np.vstack((cb.points, fresh))
        M = grown


def clg_sweep(samples, lambda_grid, M_max=256, init_seed=0, backend=None):
    """(lambda, codebook, RdPoint) for each lambda, in grid order, with M auto-grown.

    Lambdas are visited from largest to smallest so each run warm-starts
    from the previous codebook; smaller lambda never needs a smaller M.
    """
    grid = [float(v) for v in lambda_grid]
    done = {}
    prev = None
    for k in sorted(range(len(grid)), key=lambda i: -grid[i]):
        cb = clg_auto_grow(samples, grid[k], M_start=None if prev is None else prev.M, M_max=M_max,
                           init_seed=init_seed, init_points=None if prev is None else prev.points,
                           backend=backend)
        done[k] = (grid[k], cb, eval_codebook(cb, samples, backend))
        prev = cb
    return [done[k] for k in range(len(grid))]
