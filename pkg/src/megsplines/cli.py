"""Command-line driver: ``megsplines {synth,invert,oracle,selftest}``.

Exit codes are 0 on success, 1 on numerical failure and 2 on
configuration errors (including missing files).
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _levels(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid noise level list {text!r}") from None


def _methods(text):
    return [m.strip() for m in text.split(",") if m.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (JSON)")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS threads (default: available cores)")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (MEGSPLINES_OUT overrides the config)")
    p = argparse.ArgumentParser(prog="megsplines", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate synthetic data files")
    s.add_argument("--noise-level", type=_levels, help="comma-separated percentages")
    s.add_argument("--route", choices=("svd", "oracle"))
    s.add_argument("--points", type=int, help="QMC points for the oracle route")
    s.add_argument("--paper-scale", action="store_true",
                   help="allow QMC budgets beyond 1e6 points")

    v = sub.add_parser("invert", parents=[common], help="regularised inversion")
    v.add_argument("--noise-level", type=_levels)
    v.add_argument("--lambda", dest="lam", type=float,
                   help="manually chosen parameter; must lie on the grid")
    v.add_argument("--choose", type=_methods, help="METHOD[,METHOD...]")
    v.add_argument("--no-export", action="store_true", help="skip field exports")

    o = sub.add_parser("oracle", parents=[common], help="series vs integral oracle block")
    o.add_argument("--points", type=int)
    o.add_argument("--block", type=int, help="use the first k sensors (k x k block)")
    o.add_argument("--paper-scale", action="store_true")

    t = sub.add_parser("selftest", parents=[common], help="fast invariant suite")
    t.add_argument("--perturb-stencil", type=float, default=0.0, help=argparse.SUPPRESS)
    return p


def _set_threads(n):
    n = os.cpu_count() or 1 if n is None else n
    for var in _THREAD_VARS:
        os.environ.setdefault(var, str(n))


def _out_dir(args, cfg):
    env = os.environ.get("MEGSPLINES_OUT")
    if env:
        return Path(env)
    if args.out is not None:
        return args.out
    return cfg.resolve(cfg["output"])


def _cmd_synth(args, cfg, pipeline):
    route = args.route or cfg["route"]
    written = pipeline.run_synth(cfg, _out_dir(args, cfg), levels=args.noise_level,
                                 route=route, points=args.points,
                                 paper_scale=args.paper_scale)
    for level, (path, nn) in written.items():
        print(f"noise {level:g}%: {path} (noise norm {nn:.4e})")


def _cmd_invert(args, cfg, pipeline):
    rows = pipeline.run_invert(cfg, _out_dir(args, cfg), levels=args.noise_level,
                               manual_lambda=args.lam, choose=args.choose,
                               export=not args.no_export)
    print(pipeline._fmt_table(rows, pipeline.SUMMARY_COLUMNS), end="")


def _cmd_oracle(args, cfg, pipeline):
    rows = cols = None
    if args.block:
        rows = cols = list(range(args.block))
    res = pipeline.run_oracle(cfg, _out_dir(args, cfg), points=args.points,
                              paper_scale=args.paper_scale, rows=rows, cols=cols)
    print(f"mean relative deviation {res['mean']:.4%} (max {res['max']:.4%}) "
          f"with {res['points']} points in {res['seconds']:.1f} s")


def _cmd_selftest(args, pipeline):
    stencil = None
    if args.perturb_stencil:
        from .synthlab import STENCIL_D2_ORDER8
        stencil = STENCIL_D2_ORDER8.copy()
        stencil[0] *= 1 + args.perturb_stencil
    t0 = time.perf_counter()
    results = pipeline.run_selftest(stencil=stencil)
    print(pipeline.format_selftest(results), end="")
    print(f"total {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_NUMERICAL


def main(argv=None):
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    # heavy imports after the thread variables are in place
    from numpy.linalg import LinAlgError

    from . import pipeline
    from .config import ConfigError, load_config
    from .headmodel import ModelError

    try:
        if args.command == "selftest":
            return _cmd_selftest(args, pipeline)
        cfg = load_config(args.config)
        if args.command == "synth" and args.route:
            cfg = cfg.with_overrides(route=args.route)
        {"synth": _cmd_synth, "invert": _cmd_invert, "oracle": _cmd_oracle}[args.command](
            args, cfg, pipeline)
    except (ConfigError, FileNotFoundError, ModelError, json.JSONDecodeError) as exc:
        print(f"megsplines: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # bad user input such as a manual lambda off the grid
        print(f"megsplines: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, LinAlgError) as exc:
        print(f"megsplines: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
