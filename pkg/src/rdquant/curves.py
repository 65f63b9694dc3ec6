"""Curve rows, CSV output and figure assembly shared by the CLI and the tests."""
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import ecsq, ecvq, schemes
from .gauss import shannon_rate

CSV_HEADER = ("scheme", "param", "rate", "distortion")


@dataclass(frozen=True)
class CurveRow:
    scheme: str
    param: float
    rate: float
    distortion: float


def _fmt(x):
    return format(float(x), ".10g")


def write_csv(rows, stream, header=True):
    w = csv.writer(stream, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow((r.scheme, _fmt(r.param), _fmt(r.rate), _fmt(r.distortion)))


def rows_to_csv(rows):
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def read_csv(text):
    rdr = csv.DictReader(io.StringIO(text))
    return [CurveRow(r["scheme"], float(r["param"]), float(r["rate"]), float(r["distortion"]))
            for r in rdr]


def by_scheme(rows):
    out = {}
    for r in rows:
        out.setdefault(r.scheme, []).append(r)
    return out


def distortion_at_rate(rows, rate):
    """Lowest distortion at ``rate`` along a parametric curve (linear between rows).

    Works on non-monotone loci such as the ternary curve: every segment that
    crosses ``rate`` is interpolated and the minimum is taken.  Returns NaN if
    the curve never reaches ``rate``.
    """
    best = math.inf
    for a, b in zip(rows, rows[1:]):
        lo, hi = sorted((a.rate, b.rate))
        if not lo <= rate <= hi:
            continue
        if hi == lo:
            d = min(a.distortion, b.distortion)
        else:
            w = (rate - a.rate) / (b.rate - a.rate)
            d = a.distortion * (1.0 - w) + b.distortion * w
        best = min(best, d)
    for r in rows:
        if r.rate == rate:
            best = min(best, r.distortion)
    return best if math.isfinite(best) else math.nan


# --------------------------------------------------------------------------
# curve generators
# --------------------------------------------------------------------------

def shannon_rows(d_grid):
    return [CurveRow("shannon", d, shannon_rate(d), d) for d in d_grid]


def scheme_rows(scheme, beta_grid):
    name = str(scheme if isinstance(scheme, schemes.SchemeId) else schemes.SchemeId(scheme))
    return [CurveRow(name, p.beta, p.point.rate, p.point.distortion)
            for p in schemes.sweep_scheme(scheme, beta_grid)]


def lloyd_max_rows(M, lambda_grid):
    return [CurveRow(f"lloyd-max-{M}", lam, pt.rate, pt.distortion)
            for lam, pt in ecsq.sweep_lambda(M, lambda_grid)]


def default_shannon_grid(n=400):
    return np.geomspace(1e-3, 1.0, n)


def default_ecsq_lambda_grid(n=80):
    return np.concatenate(([0.0], np.geomspace(1e-2, 1.5, n - 1)))


def figure1_rows(beta_grid=None, lambda_grid=None, b=8, levels=(3,)):
    beta_grid = schemes.default_beta_grid() if beta_grid is None else beta_grid
    lambda_grid = default_ecsq_lambda_grid() if lambda_grid is None else lambda_grid
    rows = shannon_rows(default_shannon_grid())
    rows += scheme_rows("scaled-sign", beta_grid)
    rows += scheme_rows("asym-binary", beta_grid)
    rows += scheme_rows(schemes.SchemeId.topk_bbit(b), beta_grid)
    rows += scheme_rows("topk-ternary", beta_grid)
    for M in levels:
        rows += lloyd_max_rows(M, lambda_grid)
    return rows


def clg_rows(N, samples_count, seed, lambda_grid, M_max=256, init_seed=0):
    samples = ecvq.sample_gaussian(N, samples_count, seed)
    rows = []
    for lam, cb, pt in ecvq.clg_sweep(samples, lambda_grid, M_max=M_max, init_seed=init_seed):
        rows.append(CurveRow(f"clg-n{N}", lam, pt.rate, pt.distortion))
    return rows
