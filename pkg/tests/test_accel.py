import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rdquant import _accel

needs_numba = pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba disabled")


def brute_assign(x, points, penalty):
    cost = ((x[:, None, :] - points[None, :, :]) ** 2).sum(axis=2) + penalty[None, :]
    return cost.argmin(axis=1), cost.min(axis=1)


@pytest.mark.parametrize("backend", [pytest.param("numba", marks=needs_numba), "numpy"])
def test_assign_against_brute_force(backend):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40_000, 3))
    pts = rng.normal(size=(17, 3))
    pen = rng.uniform(0, 2, 17)
    pen[4] = np.inf
    idx, cost = _accel.assign_min_cost(x, pts, pen, backend)
    ref_idx, ref_cost = brute_assign(x, pts, pen)
    assert np.array_equal(idx, ref_idx)
    assert np.allclose(cost, ref_cost, rtol=0, atol=1e-12)
    assert not np.any(idx == 4)


@needs_numba
@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 300), st.integers(1, 4)),
              elements=st.floats(-5, 5).map(lambda v: round(v, 1))),
       st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_backends_bit_identical(x, m, seed):
    rng = np.random.default_rng(seed)
    # coarse grids force exact ties, which must resolve identically
    pts = np.round(rng.normal(size=(m, x.shape[1])), 1)
    pen = np.round(rng.uniform(0, 1, m), 1)
    a = _accel.assign_min_cost(x, pts, pen, "numba")
    b = _accel.assign_min_cost(x, pts, pen, "numpy")
    assert np.array_equal(a[0], b[0]) and a[1].tobytes() == b[1].tobytes()
    idx = a[0]
    s1, c1 = _accel.centroid_sums(x, idx, m, "numba")
    s2, c2 = _accel.centroid_sums(x, idx, m, "numpy")
    assert s1.tobytes() == s2.tobytes() and np.array_equal(c1, c2)
    d1 = _accel.squared_distances(x, pts, idx, "numba")
    d2 = _accel.squared_distances(x, pts, idx, "numpy")
    assert d1.tobytes() == d2.tobytes()
    t = np.sort(np.unique(pts[:, 0]))
    assert np.array_equal(_accel.bin_values(x[:, 0], t, "numba"), _accel.bin_values(x[:, 0], t, "numpy"))


def test_bin_ties_go_right():
    t = np.array([-1.0, 0.0, 2.0])
    x = np.array([-1.0, -0.5, 0.0, 2.0, 3.0, -7.0])
    assert _accel.bin_values(x, t, "numpy").tolist() == [1, 1, 2, 3, 3, 0]
    assert np.array_equal(_accel.bin_values(x, np.array([])), np.zeros(6, dtype=np.int64))


def test_unknown_backend():
    with pytest.raises(ValueError):
        _accel.assign_min_cost(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1), "cuda")


def _child(env_extra, code):
    env = dict(os.environ, **env_extra)
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)


def test_env_flag_selects_numpy():
    code = ("from rdquant import _accel, ecvq;"
            "s = ecvq.sample_gaussian(2, 20000, 7);"
            "cb = ecvq.clg_train(s, 9, 0.8);"
            "print(_accel.USE_NUMBA, cb.points.tobytes().hex()[:64])")
    off = _child({"RDQUANT_DISABLE_NUMBA": "1"}, code)
    assert off.returncode == 0, off.stderr
    flag, digest = off.stdout.split()
    assert flag == "False"
    on = _child({"RDQUANT_DISABLE_NUMBA": "0"}, code)
    if on.stdout.split()[0] == "True":
        assert on.stdout.split()[1] == digest


def test_threads_env():
    ok = _child({"RDQUANT_THREADS": "1"}, "import rdquant._accel as a; print(a.USE_NUMBA)")
    assert ok.returncode == 0, ok.stderr
    bad = _child({"RDQUANT_THREADS": "many"}, "import rdquant._accel")
    assert bad.returncode != 0 and "RDQUANT_THREADS" in bad.stderr
