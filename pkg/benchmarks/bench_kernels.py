"""Time the numba and numpy kernels on CLG-sized problems.

    python benchmarks/bench_kernels.py [--samples 100000] [--repeat 5]

Both backends are checked for bit-identical output before timing.
"""
import argparse
import time

import numpy as np

from rdquant import _accel


def _time(fn, repeat):
    fn()  # warm-up (numba compiles or loads its cache here)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.USE_NUMBA:
        raise SystemExit("numba backend disabled (RDQUANT_DISABLE_NUMBA set?)")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'N':>3}{'M':>5}{'numba ms':>11}{'numpy ms':>11}{'speedup':>9}")
    for N, M, lam in ((2, 9, 0.0), (2, 9, 0.8), (4, 64, 0.3), (4, 256, 0.1), (8, 256, 0.3)):
        x = rng.standard_normal((args.samples, N))
        pts = x[rng.choice(args.samples, M, replace=False)]
        probs = rng.dirichlet(np.ones(M))
        pen = np.zeros(M) if lam == 0 else -lam * np.log2(probs)
        a = _accel.assign_min_cost(x, pts, pen, "numba")
        b = _accel.assign_min_cost(x, pts, pen, "numpy")
        assert np.array_equal(a[0], b[0]) and a[1].tobytes() == b[1].tobytes()
        tn = _time(lambda: _accel.assign_min_cost(x, pts, pen, "numba"), args.repeat)
        tp = _time(lambda: _accel.assign_min_cost(x, pts, pen, "numpy"), args.repeat)
        print(f"{f'assign (lambda={lam})':<28}{N:>3}{M:>5}{1e3 * tn:>11.2f}{1e3 * tp:>11.2f}{tp / tn:>9.1f}")

        idx = a[0]
        tn = _time(lambda: _accel.centroid_sums(x, idx, M, "numba"), args.repeat)
        tp = _time(lambda: _accel.centroid_sums(x, idx, M, "numpy"), args.repeat)
        print(f"{'centroid sums':<28}{N:>3}{M:>5}{1e3 * tn:>11.2f}{1e3 * tp:>11.2f}{tp / tn:>9.1f}")

    v = rng.standard_normal(args.samples * 10)
    t = np.sort(rng.standard_normal(7))
    tn = _time(lambda: _accel.bin_values(v, t, "numba"), args.repeat)
    tp = _time(lambda: _accel.bin_values(v, t, "numpy"), args.repeat)
    print(f"{'scalar binning (M=8)':<28}{1:>3}{8:>5}{1e3 * tn:>11.2f}{1e3 * tp:>11.2f}{tp / tn:>9.1f}")


if __name__ == "__main__":
    main()
