"""Command-line front end: ``python -m rdquant <command>`` or ``rdquant <command>``.

Exit codes: 0 success, 1 runtime or format failure, 2 usage error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import codec, curves, ecsq, ecvq, schemes
from .gauss import shannon_rate

CURVE_SCHEMES = ("shannon", "scaled-sign", "asym-binary", "topk-bbit", "topk-ternary", "lloyd-max")


class CliError(Exception):
    """Runtime failure reported on stderr with exit code 1."""


def _floats(values):
    return [float(v) for v in values]


# --------------------------------------------------------------------------
# curve
# --------------------------------------------------------------------------

def cmd_curve(args, out):
    if args.scheme == "shannon":
        grid = _floats(args.d) if args.d else curves.default_shannon_grid()
        rows = curves.shannon_rows(sorted(grid))
    elif args.scheme == "lloyd-max":
        grid = _floats(args.lam) if args.lam else curves.default_ecsq_lambda_grid()
        rows = curves.lloyd_max_rows(args.levels, sorted(grid))
    else:
        grid = sorted(_floats(args.beta)) if args.beta else schemes.default_beta_grid()
        scheme = (schemes.SchemeId.topk_bbit(args.b) if args.scheme == "topk-bbit"
                  else schemes.SchemeId(args.scheme))
        rows = curves.scheme_rows(scheme, grid)
    curves.write_csv(rows, out)


# --------------------------------------------------------------------------
# design / clg
# --------------------------------------------------------------------------

def cmd_design(args, out):
    cfg = ecsq.LloydMaxConfig(args.levels, args.lam, tol=args.tol, max_iter=args.max_iter)
    try:
        spec = ecsq.lloyd_max(cfg)
    except ecsq.LloydMaxDivergence as exc:
        raise CliError(f"{exc}\n" + _format_trace(exc.trace)) from exc
    pt = ecsq.eval_scalar(spec)
    doc = spec.to_dict()
    doc.update(levels=spec.levels, **{"lambda": args.lam}, rate=pt.rate, distortion=pt.distortion,
               stop_reason=spec.stop_reason, iterations=spec.iterations)
    _write_json(doc, args.out, out)
    print(f"rate={pt.rate:.6f} distortion={pt.distortion:.6f} levels={spec.levels} "
          f"stop={spec.stop_reason}", file=sys.stderr)


def _format_trace(trace, last=10):
    return "\n".join("  iter %d: J=%r D=%r H=%r M=%d" % tuple(t) if len(t) == 5
                     else f"  iter {i}: J={t!r}" for i, t in enumerate(trace[-last:]))


def cmd_clg(args, out):
    if args.n < 1 or args.m < 1:
        raise CliError("--n and --m must be >= 1")
    if args.samples < args.m:
        raise CliError("--samples must be at least --m")
    samples = ecvq.sample_gaussian(args.n, args.samples, args.seed)
    try:
        cb = ecvq.clg_train(samples, args.m, args.lam, tol=args.tol, max_iter=args.max_iter,
                            init_seed=args.init_seed, restarts=args.restarts)
    except ecvq.TrainingDivergence as exc:
        trace = "\n".join(f"  iter {i + 1}: cost={c!r}" for i, c in enumerate(exc.trace[-10:]))
        raise CliError(f"{exc}\n{trace}") from exc
    pt = ecvq.eval_codebook(cb, samples)
    doc = cb.to_dict()
    doc.update(rate_per_component=pt.rate, distortion_per_component=pt.distortion,
               seed=args.seed, init_seed=args.init_seed, samples=args.samples,
               iterations=cb.iterations, stop_reason=cb.stop_reason)
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    if args.assignments:
        table = ecvq.export_assignments(cb, samples)
        with open(args.assignments, "w") as fh:
            fh.write("sample,cell\n")
            for k, c in table.rows():
                fh.write(f"{k},{c}\n")
    print(f"rate={pt.rate:.6f} distortion={pt.distortion:.6f} empty_cells={cb.empty_cells}", file=out)


def _write_json(doc, path, out):
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        out.write(text)


# --------------------------------------------------------------------------
# codec
# --------------------------------------------------------------------------

def _read_file(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc


def cmd_sample(args, out):
    rng = np.random.default_rng(args.seed)
    u = args.sigma * rng.standard_normal(args.d)
    Path(args.output).write_bytes(codec.gradient_to_bytes(u))


def cmd_encode(args, out):
    u = codec.gradient_from_bytes(_read_file(args.input))
    tau = args.tau
    if tau is None and args.beta is not None:
        tau = args.beta * args.sigma
    if args.scheme in ("threshold", "ternary") and tau is None:
        raise CliError(f"--tau or --beta is required for {args.scheme}")
    if args.scheme == "topk" and args.k is None:
        raise CliError("--k is required for topk")
    try:
        enc = codec.encode(u, args.scheme, k=args.k, b=args.b, tau=tau,
                           reconstruction=args.reconstruction)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    Path(args.output).write_bytes(codec.to_bytes(enc))
    m = codec.measure_empirical_rd(u, enc)
    print(f"raw_bits_per_component={m.rate_raw:.6f} entropy_rate={m.rate_entropy:.6f} "
          f"distortion={m.distortion:.6f}", file=sys.stderr)


def cmd_decode(args, out):
    enc = codec.from_bytes(_read_file(args.input))
    u = codec.decode(enc)
    Path(args.output).write_bytes(codec.gradient_to_bytes(u))
    print(f"d={enc.d} raw_bits_per_component={enc.payload_bits() / enc.d:.6f} "
          f"entropy_rate={enc.entropy_bits() / enc.d:.6f}", file=sys.stderr)


# --------------------------------------------------------------------------
# figures
# --------------------------------------------------------------------------

def cmd_figure(args, out):
    if args.which == "fig1":
        curves.write_csv(curves.figure1_rows(b=args.b), out)
    elif args.which == "fig2":
        rows = curves.figure1_rows(b=args.b)
        grid = _floats(args.lam) if args.lam else ecvq.default_lambda_grid()
        by_n = {}
        for N in args.dims:
            by_n[N] = curves.clg_rows(N, args.samples, args.seed, sorted(grid), M_max=args.max_levels,
                                      init_seed=args.init_seed)
            rows += by_n[N]
        curves.write_csv(rows, out)
        lo_n, hi_n = min(by_n), max(by_n)
        d_lo = curves.distortion_at_rate(by_n[lo_n], 0.5)
        d_hi = curves.distortion_at_rate(by_n[hi_n], 0.5)
        print(f"check: N={hi_n} distortion@0.5={d_hi:.4f} <= N={lo_n} distortion@0.5={d_lo:.4f}: "
              f"{'ok' if d_hi <= d_lo else 'FAILED'}", file=sys.stderr)
    else:
        samples = ecvq.sample_gaussian(2, args.samples, args.seed)
        w = out.write
        w("reading,target,method,lambda,rate,distortion,matched\n")
        for reading in ("per-component", "total"):
            c = ecvq.compare_scalar_vector(samples, reading=reading, init_seed=args.init_seed)
            for name, res in (("lloyd-max-3", c.lloyd_max), ("clg-9", c.clg)):
                w(f"{reading},{c.target:g},{name},{res.lam:.10g},{res.point.rate:.10g},"
                  f"{res.point.distortion:.10g},{int(res.hit)}\n")
            print(f"{reading}: lloyd-max entropy={c.lloyd_max.point.rate:.3f} "
                  f"clg entropy={c.clg.point.rate:.3f} clg_lower={c.clg_lower}", file=sys.stderr)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="rdquant", description=__doc__.splitlines()[0])
    p.add_argument("--sigma", type=float, default=1.0, help="source standard deviation (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curve", help="rate-distortion curve of one scheme as CSV")
    c.add_argument("scheme", choices=CURVE_SCHEMES)
    c.add_argument("--beta", nargs="+", help="boundary values in units of sigma")
    c.add_argument("--d", nargs="+", help="normalized distortions (shannon)")
    c.add_argument("--lambda", dest="lam", nargs="+", help="Lagrange multipliers (lloyd-max)")
    c.add_argument("--b", type=int, default=8, help="value bits for topk-bbit")
    c.add_argument("--levels", type=int, default=3, help="M for lloyd-max")
    c.set_defaults(func=cmd_curve)

    d = sub.add_parser("design", help="design an entropy-constrained scalar quantizer")
    d.add_argument("--levels", type=int, required=True)
    d.add_argument("--lambda", dest="lam", type=float, default=0.0)
    d.add_argument("--tol", type=float, default=1e-10)
    d.add_argument("--max-iter", type=int, default=10_000)
    d.add_argument("--out")
    d.set_defaults(func=cmd_design)

    g = sub.add_parser("clg", help="train an entropy-constrained vector quantizer")
    g.add_argument("--n", type=int, required=True, help="vector dimension")
    g.add_argument("--m", type=int, required=True, help="codebook size")
    g.add_argument("--lambda", dest="lam", type=float, default=0.0)
    g.add_argument("--samples", type=int, default=100_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--init-seed", type=int, default=0)
    g.add_argument("--restarts", type=int, default=1)
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--max-iter", type=int, default=500)
    g.add_argument("--out", help="codebook JSON path")
    g.add_argument("--assignments", help="per-sample cell CSV path")
    g.set_defaults(func=cmd_clg)

    s = sub.add_parser("sample", help="write a seeded Gaussian gradient (GRDV)")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("output")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("encode", help="GRDV -> GRDQ")
    e.add_argument("--scheme", required=True, choices=("scaled-sign", "topk", "threshold", "ternary"))
    e.add_argument("--k", type=int)
    e.add_argument("--b", type=int, default=32)
    e.add_argument("--tau", type=float, help="absolute threshold")
    e.add_argument("--beta", type=float, help="threshold in units of --sigma")
    e.add_argument("--reconstruction", choices=("average", "threshold"), default="average")
    e.add_argument("input")
    e.add_argument("output")
    e.set_defaults(func=cmd_encode)

    x = sub.add_parser("decode", help="GRDQ -> GRDV")
    x.add_argument("input")
    x.add_argument("output")
    x.set_defaults(func=cmd_decode)

    f = sub.add_parser("figure", help="regenerate figure data")
    f.add_argument("which", choices=("fig1", "fig2", "fig5-compare"))
    f.add_argument("--b", type=int, default=8)
    f.add_argument("--dims", type=int, nargs="+", default=list(range(2, 9)))
    f.add_argument("--lambda", dest="lam", nargs="+")
    f.add_argument("--samples", type=int, default=100_000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--init-seed", type=int, default=0)
    f.add_argument("--max-levels", type=int, default=256)
    f.set_defaults(func=cmd_figure)
    return p


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.sigma > 0:
        parser.error("--sigma must be positive")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, out)
    except codec.CodecFormatError as exc:
        print(f"rdquant: malformed input: {exc}", file=sys.stderr)
        return 1
    except CliError as exc:
        print(f"rdquant: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError) as exc:
        print(f"rdquant: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
