"""Command-line entry point: ``adaptive-convex {analyze,pack,run,slopes}``."""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import sys
from typing import Optional, Sequence

from .convex_fn import parse_function
from .errors import ConvexError
from .harness import ExperimentConfig, load_config, read_records, run_experiment, slopes, write_records
from .modulus import ComplexityReport, complexity_report
from .packing import build_packing, oracle_allocation, write_allocation_csv, write_packing_csv

log = logging.getLogger(__name__)

FUNCTION_HELP = ("function spec: hinge, data-derived, quadratic:a,b,c, negsqrt:s, softplus:s,k, "
                 "affine:slope,intercept, piecewise:'x y;x y;...', knots:PATH")


@contextlib.contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _cmd_analyze(args) -> int:
    f = parse_function(args.function)
    with _output(args.out) as out:
        out.write(ComplexityReport.csv_header() + "\n")
        for eps in args.eps:
            out.write(complexity_report(f, eps).csv_row() + "\n")
    return 0


def _cmd_pack(args) -> int:
    f = parse_function(args.function)
    pk = build_packing(f, args.eps)
    alloc = oracle_allocation(f, args.eps, args.sigma, args.delta, pk)
    with _output(args.out) as out:
        write_packing_csv(out, f, pk)
    if args.alloc_out:
        write_allocation_csv(args.alloc_out, alloc)
    else:
        sys.stdout.write("\n")
        write_allocation_csv(sys.stdout, alloc)
    log.info("n_pck=%d design_points=%d samples_per_point=%d total=%d",
             pk.n_pck, len(alloc.design_points), alloc.samples_per_point, alloc.total)
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {k: v for k, v in (("seed", args.seed), ("function", args.function),
                                   ("sigma", args.sigma)) if v is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    records = run_experiment(cfg, threads=args.threads, record_wall_time=not args.no_wall_time)
    with _output(args.out) as out:
        write_records(records, out)
    return 0


def _cmd_slopes(args) -> int:
    records = read_records(args.csv)
    result = slopes(records, interior=not args.full)
    with _output(args.out) as out:
        out.write("method,slope\n")
        for method, s in result.items():
            out.write(f"{method},{s!r}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptive-convex",
                                description="Adaptive sampling and estimation of convex functions on [0, 1].")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="complexity measures of a function at one or more eps")
    a.add_argument("--function", default="hinge", help=FUNCTION_HELP)
    a.add_argument("--eps", type=float, nargs="+", default=[1e-2])
    a.add_argument("--out", help="output CSV (default stdout)")
    a.set_defaults(func=_cmd_analyze)

    k = sub.add_parser("pack", parents=[common], help="packing intervals and oracle design")
    k.add_argument("--function", default="hinge", help=FUNCTION_HELP)
    k.add_argument("--eps", type=float, default=1e-2)
    k.add_argument("--sigma", type=float, default=0.1)
    k.add_argument("--delta", type=float, default=0.05)
    k.add_argument("--out", help="packing CSV (default stdout)")
    k.add_argument("--alloc-out", help="allocation CSV (default: stdout after the packing)")
    k.set_defaults(func=_cmd_pack)

    r = sub.add_parser("run", parents=[common], help="run an experiment grid and write one CSV row per run")
    r.add_argument("--config", help="flat 'key = value' config file")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--function", help="override the config function")
    r.add_argument("--sigma", type=float, help="override the config noise level")
    r.add_argument("--threads", type=int, default=1, help="worker processes")
    r.add_argument("--out", help="output CSV (default stdout)")
    r.add_argument("--no-wall-time", action="store_true",
                   help="write 0 for wall time so reruns are byte-identical")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("slopes", parents=[common], help="log-log slope of median error per method")
    s.add_argument("csv", help="CSV written by 'run'")
    s.add_argument("--full", action="store_true", help="use the error on [0, 1] instead of the subinterval")
    s.add_argument("--out", help="output CSV (default stdout)")
    s.set_defaults(func=_cmd_slopes)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConvexError, OSError) as exc:
        print(f"adaptive-convex: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
