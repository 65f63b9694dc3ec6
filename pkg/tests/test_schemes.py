import math

import numpy as np
import pytest

import oracles
from rdquant.gauss import shannon_rate, std_cdf, std_cdf_inv, truncated_moments
from rdquant.schemes import (
    SCALED_SIGN_DISTORTION,
    SchemeId,
    asym_binary_point,
    asym_binary_rate_for_distortion,
    asym_h,
    default_beta_grid,
    scaled_sign_point,
    sweep_scheme,
    topk_bbit_point,
    topk_ternary_point,
)

BETA_995 = std_cdf_inv(0.995)


def test_scaled_sign():
    pt = scaled_sign_point()
    assert pt.rate == 1.0
    assert pt.distortion == pytest.approx(0.3633802276324187, abs=1e-15)
    assert pt.distortion > 0.25
    assert pt.distortion == pytest.approx(truncated_moments(0, math.inf).variance, abs=1e-15)


def test_asym_h():
    # (1 - (2 phi(0))^2) * 0.5
    assert asym_h(0.0) == pytest.approx(0.5 * (1 - 2 / math.pi), abs=1e-15)
    assert asym_h(0.0) + asym_h(-0.0) == pytest.approx(SCALED_SIGN_DISTORTION, abs=1e-15)
    assert asym_h(1.0) == pytest.approx(0.52980, abs=1e-4)
    # h(beta) is Phi(beta) * Var(X | X < beta)
    for beta in (-1.3, 0.2, 2.0):
        tm = truncated_moments(-math.inf, beta)
        assert asym_h(beta) == pytest.approx(tm.mass * tm.variance, abs=1e-13)


def test_asym_binary_point():
    pt = asym_binary_point(0.0)
    assert pt.rate == 1.0 and pt.distortion == pytest.approx(0.3633802276, abs=1e-9)
    pt = asym_binary_point(1.0)
    assert pt.rate == pytest.approx(0.6311, abs=1e-3)
    assert pt.distortion == pytest.approx(0.5614, abs=1e-3)
    assert asym_binary_point(-1.0) == asym_binary_point(1.0)
    far = asym_binary_point(8.0)
    assert far.rate < 1e-12 and far.distortion == pytest.approx(1.0, abs=1e-12)


def test_asym_binary_inverse():
    beta, rate = asym_binary_rate_for_distortion(SCALED_SIGN_DISTORTION)
    assert beta == 0.0 and rate == 1.0
    beta, rate = asym_binary_rate_for_distortion(0.5614)
    assert beta == pytest.approx(1.0, abs=1e-3) and rate == pytest.approx(0.6311, abs=1e-3)
    assert abs(asym_h(beta) + asym_h(-beta) - 0.5614) <= 1e-9
    _, rate = asym_binary_rate_for_distortion(0.99)
    assert rate < 0.05
    for bad in (0.3, 1.0, 1.2):
        with pytest.raises(ValueError):
            asym_binary_rate_for_distortion(bad)


def test_topk_bbit():
    assert tuple(topk_bbit_point(0.0, 8)) == (8.0, 0.0)
    pt = topk_bbit_point(2.5758, 8)
    assert pt.rate == pytest.approx(0.1608, abs=1e-3)
    assert pt.distortion == pytest.approx(0.9155, abs=1e-3)
    far = topk_bbit_point(9.0, 8)
    assert far.rate < 1e-12 and far.distortion == pytest.approx(1.0, abs=1e-12)
    assert tuple(topk_bbit_point(math.inf, 8)) == (0.0, 1.0)
    # unsimplified form, normalized by the kept mass then rescaled
    beta = 1.3
    inner = 2 * std_cdf(beta) - 1
    direct = (1 - 2 * beta * math.exp(-beta**2 / 2) / math.sqrt(2 * math.pi) / inner) * inner
    assert topk_bbit_point(beta, 8).distortion == pytest.approx(direct, abs=1e-14)
    with pytest.raises(ValueError):
        topk_bbit_point(-0.1, 8)


def test_topk_ternary():
    pt = topk_ternary_point(0.0)
    ss = scaled_sign_point()
    assert abs(pt.rate - ss.rate) <= 1e-12 and abs(pt.distortion - ss.distortion) <= 1e-12
    eq = topk_ternary_point(std_cdf_inv(2 / 3))
    assert eq.rate == pytest.approx(math.log2(3), abs=1e-12)
    assert topk_ternary_point(0.4307).rate == pytest.approx(1.58496, abs=1e-3)
    pt = topk_ternary_point(1.0)
    assert pt.rate == pytest.approx(1.2188, abs=1e-3)
    assert pt.distortion == pytest.approx(0.2619, abs=1e-3)


def test_sweep():
    pts = sweep_scheme("asym-binary", [0.0])
    assert pts[0].beta == 0.0 and pts[0].point.rate == 1.0
    grid = [0.0, 0.4307, 1.0]
    pts = sweep_scheme("topk-ternary", grid)
    assert [p.point for p in pts] == [topk_ternary_point(b) for b in grid]
    only = sweep_scheme("scaled-sign", [0.1, 0.2, 5.0])
    assert len(only) == 1 and only[0].point == scaled_sign_point()
    with pytest.raises(ValueError):
        sweep_scheme("topk-ternary", [])
    with pytest.raises(ValueError):
        sweep_scheme("topk-ternary", [1.0, 0.5])
    with pytest.raises(ValueError):
        SchemeId("qsgd")
    assert str(SchemeId.topk_bbit(8)) == "topk-8bit"


CENTROID_SCHEMES = [SchemeId("asym-binary"), SchemeId("topk-ternary")]


@pytest.mark.parametrize("scheme", CENTROID_SCHEMES, ids=str)
def test_shannon_dominance_dense_grid(scheme):
    grid = np.concatenate(([0.0], default_beta_grid(2000, 1e-4, 8.0)))
    for sp in sweep_scheme(scheme, grid):
        r, d = sp.point
        assert 0 <= d <= 1 + 1e-12 and r >= 0
        if d > 0:
            assert r >= shannon_rate(d) - 1e-9


@pytest.mark.parametrize("b,crossover", [(2, 0.6219), (4, 0.2560), (8, 0.03942)])
def test_bbit_idealization_breaks_below_crossover(b, crossover):
    # exact b-bit values make D -> 0 at bounded rate, so small beta beats R(D)
    grid = default_beta_grid(4000, 1e-3, 6.0)
    bad = [beta for beta in grid
           if topk_bbit_point(beta, b).rate < shannon_rate(topk_bbit_point(beta, b).distortion) - 1e-9]
    assert bad and max(bad) == pytest.approx(crossover, abs=2e-3)
    ok = [sp.point for sp in sweep_scheme(SchemeId.topk_bbit(b), grid[grid > crossover + 2e-3])]
    assert all(p.rate >= shannon_rate(p.distortion) - 1e-9 for p in ok)


def test_monotone_distortions():
    grid = default_beta_grid()
    bb = [p.point.distortion for p in sweep_scheme(SchemeId.topk_bbit(8), grid)]
    ab = [p.point.distortion for p in sweep_scheme("asym-binary", grid)]
    assert all(b >= a for a, b in zip(bb, bb[1:]))
    assert all(b >= a for a, b in zip(ab, ab[1:]))


MC_POINTS = [
    ("asym-binary", 0.5), ("asym-binary", 1.5),
    ("topk-bbit", 1.0), ("topk-bbit", BETA_995),
    ("topk-ternary", 0.4307), ("topk-ternary", 1.0),
]


@pytest.mark.parametrize("tag,beta", MC_POINTS)
def test_monte_carlo_agreement(tag, beta, normal_1e6):
    x = normal_1e6
    if tag == "asym-binary":
        analytic = asym_binary_point(beta)
        r, rse, d, dse = oracles.mc_asym_binary(x, beta)
    elif tag == "topk-bbit":
        analytic = topk_bbit_point(beta, 8)
        r, rse, d, dse = oracles.mc_sparse_exact(x, beta, 8)
    else:
        analytic = topk_ternary_point(beta)
        r, rse, d, dse = oracles.mc_ternary(x, beta)
    assert abs(r - analytic.rate) <= 3 * rse
    assert abs(d - analytic.distortion) <= 3 * dse
