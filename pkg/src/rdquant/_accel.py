"""Hot loops: nearest-cell search for CLG, centroid accumulation, scalar binning.

Every kernel has a numba version and a pure-numpy version that produce
bit-identical results (same operation order, no fastmath).  Setting
``RDQUANT_DISABLE_NUMBA=1`` in the environment before import selects the
numpy path; ``RDQUANT_THREADS`` caps numba's thread pool (0 = auto).
"""
import os

import numpy as np

_CHUNK = 16384


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and not _env_flag("RDQUANT_DISABLE_NUMBA")


def _configure_threads():
    raw = os.environ.get("RDQUANT_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"RDQUANT_THREADS must be an integer, got {raw!r}")
    if n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# --------------------------------------------------------------------------
# numpy reference path
# --------------------------------------------------------------------------

def _assign_numpy(x, points, penalty):
    n, dim = x.shape
    idx = np.empty(n, dtype=np.int64)
    cost = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK):
        xs = x[start:start + _CHUNK]
        acc = np.zeros((xs.shape[0], points.shape[0]))
        for j in range(dim):
            diff = xs[:, j, None] - points[None, :, j]
            acc += diff * diff
        acc += penalty[None, :]
        best = np.argmin(acc, axis=1)
        idx[start:start + _CHUNK] = best
        cost[start:start + _CHUNK] = acc[np.arange(xs.shape[0]), best]
    return idx, cost


def _sq_dist_numpy(x, points, idx):
    d = np.zeros(x.shape[0])
    for j in range(x.shape[1]):
        diff = x[:, j] - points[idx, j]
        d += diff * diff
    return d


def _centroid_sums_numpy(x, idx, m):
    counts = np.bincount(idx, minlength=m).astype(np.int64)
    sums = np.empty((m, x.shape[1]))
    for j in range(x.shape[1]):
        sums[:, j] = np.bincount(idx, weights=x[:, j], minlength=m)
    return sums, counts


def _bin_numpy(x, thresholds):
    return np.searchsorted(thresholds, x, side="right").astype(np.int64)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if USE_NUMBA:
    # the TBB shipped in some images is too old for numba; never try it first
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _configure_threads()

    @numba.njit(parallel=True, cache=True)
    def _assign_numba(x, points_t, penalty):
        # points_t is (dim, m) so the inner loop over cells vectorizes; the
        # per-cell sums run over j in the same order as the numpy path
        n, dim = x.shape
        m = points_t.shape[1]
        idx = np.empty(n, dtype=np.int64)
        cost = np.empty(n, dtype=np.float64)
        for k in numba.prange(n):
            acc = np.zeros(m)
            for j in range(dim):
                xj = x[k, j]
                for c in range(m):
                    diff = xj - points_t[j, c]
                    acc[c] += diff * diff
            best = 0
            best_cost = np.inf
            for c in range(m):
                v = acc[c] + penalty[c]
                if v < best_cost:
                    best_cost = v
                    best = c
            idx[k] = best
            cost[k] = best_cost
        return idx, cost

    @numba.njit(cache=True)
    def _sq_dist_numba(x, points, idx):
        n, dim = x.shape
        d = np.empty(n)
        for k in range(n):
            acc = 0.0
            for j in range(dim):
                diff = x[k, j] - points[idx[k], j]
                acc += diff * diff
            d[k] = acc
        return d

    @numba.njit(cache=True)
    def _centroid_sums_numba(x, idx, m):
        # sequential in sample order: identical to np.bincount's accumulation
        n, dim = x.shape
        sums = np.zeros((m, dim))
        counts = np.zeros(m, dtype=np.int64)
        for k in range(n):
            c = idx[k]
            counts[c] += 1
        for j in range(dim):
            for k in range(n):
                sums[idx[k], j] += x[k, j]
        return sums, counts

    @numba.njit(parallel=True, cache=True)
    def _bin_numba(x, thresholds):
        n = x.shape[0]
        out = np.empty(n, dtype=np.int64)
        t = thresholds.shape[0]
        for k in numba.prange(n):
            lo = 0
            hi = t
            v = x[k]
            while lo < hi:
                mid = (lo + hi) // 2
                if thresholds[mid] <= v:
                    lo = mid + 1
                else:
                    hi = mid
            out[k] = lo
        return out


# --------------------------------------------------------------------------
# public dispatch
# --------------------------------------------------------------------------

def assign_min_cost(x, points, penalty, backend=None):
    """Index and value of ``min_m ||x_k - s_m||^2 + penalty_m`` for every row.

    Ties resolve to the lowest index.  ``penalty`` may contain ``+inf``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    penalty = np.ascontiguousarray(penalty, dtype=np.float64)
    if _pick(backend):
        return _assign_numba(x, np.ascontiguousarray(points.T), penalty)
    return _assign_numpy(x, points, penalty)


def squared_distances(x, points, idx, backend=None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if _pick(backend):
        return _sq_dist_numba(x, points, idx)
    return _sq_dist_numpy(x, points, idx)


def centroid_sums(x, idx, m, backend=None):
    """Per-cell coordinate sums and member counts, accumulated in sample order."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if _pick(backend):
        return _centroid_sums_numba(x, idx, int(m))
    return _centroid_sums_numpy(x, idx, int(m))


def bin_values(x, thresholds, backend=None):
    """Cell index of each value; a value equal to a threshold goes right."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    thresholds = np.ascontiguousarray(thresholds, dtype=np.float64)
    if _pick(backend):
        return _bin_numba(x, thresholds)
    return _bin_numpy(x, thresholds)


def _pick(backend):
    if backend is None:
        return USE_NUMBA
    if backend == "numba":
        if not USE_NUMBA:
            raise RuntimeError("numba backend requested but disabled or unavailable")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")
