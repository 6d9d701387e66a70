"""Command line entry point: ``ncpsmooth {solve,suite,profile,ode}``.

Exit codes: 0 when every run solved, 2 when some run failed, 1 on a
configuration error.
"""

import argparse
import json
import sys

from . import bench, problems
from .bench import ConfigurationError, SuiteConfig

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2


def _ids(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def _ints(text):
    try:
        return [int(item) for item in _ids(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ncpsmooth", description="Nonparametric smoothing Newton method for NCPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--max-iter", type=int, default=1000)
        p.add_argument("--eps-reg", type=float, default=1e-6)

    p = sub.add_parser("solve", help="solve one problem with one method")
    p.add_argument("--problem", required=True)
    p.add_argument("--size", type=int)
    p.add_argument("--method", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print the record as JSON")
    common(p)

    p = sub.add_parser("suite", help="run problems x methods and write a CSV")
    p.add_argument("--problems", type=_ids, required=True)
    p.add_argument("--methods", type=_ids, required=True)
    p.add_argument("--sizes", type=_ints, help="sizes for the P1-P3 families")
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("profile", help="performance profile on random monotone LCPs")
    p.add_argument("--instances", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--methods", type=_ids, required=True)
    p.add_argument("--measure", choices=("time", "iters"), default="time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1, help="solves averaged per timing")
    p.add_argument("--out", required=True)
    p.add_argument("--records", help="also write the raw run records here")
    common(p)

    p = sub.add_parser("ode", help="ODE example against an RK4 reference")
    p.add_argument("--grid", type=int, required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--out", required=True)
    common(p)
    return parser


def _suite_cells(ids, sizes):
    cells = []
    for pid in ids:
        if pid not in problems.PROBLEM_IDS:
            raise ConfigurationError(f"unknown problem id {pid!r}")
        if pid in bench.DEFAULT_SIZES and pid in problems.SIZED_IDS:
            chosen = sizes or bench.DEFAULT_SIZES[pid]
        elif pid in problems.SIZED_IDS:
            chosen = sizes or [None]
        else:
            chosen = [problems.FIXED_SIZES[pid]]
        cells.extend((pid, n) for n in chosen)
    return cells


def _exit_code(records):
    return EXIT_OK if all(r.solved for r in records) else EXIT_FAILED


def _run(args):
    cfg = SuiteConfig(tol=args.tol, max_iter=args.max_iter, eps_reg=args.eps_reg)
    if args.command == "solve":
        records = bench.run_suite([(args.problem, args.size, args.seed)], [args.method], cfg)
        if not records:
            raise ConfigurationError(f"{args.method} does not apply to {args.problem}")
        rec = records[0]
        if args.json:
            print(json.dumps({k: bench._json_float(v) if isinstance(v, float) else v
                              for k, v in rec.__dict__.items()}))
        else:
            print(f"{rec.problem} n={rec.size} {rec.method}: {rec.status} "
                  f"iter={rec.iterations} opt={rec.opt:.3e} feas={rec.feas:.3e} "
                  f"time={rec.wall_time_s:.3f}s")
        return _exit_code(records)
    if args.command == "suite":
        records = bench.run_suite(_suite_cells(args.problems, args.sizes), args.methods, cfg)
        bench.emit(records, "csv", args.out)
        return _exit_code(records)
    if args.command == "profile":
        if args.instances < 1 or args.dim < 1:
            raise ConfigurationError("instances and dim must be positive")
        cells = bench.random_cells(args.instances, args.dim, args.seed)
        records = bench.run_suite(cells, args.methods, cfg, repeats=args.repeats)
        curves = bench.performance_profile(records, args.measure)
        bench.emit(curves, "json" if args.out.endswith(".json") else "csv", args.out)
        if args.records:
            bench.emit(records, "csv", args.records)
        return _exit_code(records)
    comparison = bench.ode_comparison(args.grid, args.method, cfg)
    bench.write_ode(comparison, args.out)
    print(f"max |x_lcp - x_rk4| = {comparison.max_abs_error:.3e}, "
          f"max |x+ x-| = {comparison.max_complementarity:.3e}")
    return EXIT_OK if comparison.report.solved else EXIT_FAILED


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return _run(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
