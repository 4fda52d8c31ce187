"""Command-line entry point: ``tensorrvea {bench,scale,neuro,ops,verify}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import tensor_ops as T
from .config import FAMILIES, ConfigError, build_config, load_file
from .experiments import COMMANDS, prepare_out, read_csv

_HELP = {
    "bench": "TensorRVEA, NSGA-II and random search on DTLZ1-4 (IGD, HV per generation)",
    "scale": "per-generation wall time of tensor vs scalar-oracle pipelines over population and dimension sweeps",
    "neuro": "neuroevolution of MLP policies on toy control tasks (HV, EU of the archive)",
    "ops": "TensorRVEA with each reproduction operator on the toy control tasks",
    "verify": "oracle-equivalence suites; nonzero exit on any mismatch",
}


def _list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML file with experiment settings")
    common.add_argument("--seed", type=int, help="base seed; repetition k uses seed + k")
    common.add_argument("--out", default="results", metavar="DIR", help="output directory (default: results)")
    common.add_argument("--reps", type=int, help="independent repetitions per setting")
    common.add_argument("--pop", type=int, help="population size (scale: single population-sweep point)")
    common.add_argument("--dim", type=int, help="decision dimension (scale: single dimension-sweep point)")
    common.add_argument("--gens", type=int, help="generations per run")
    common.add_argument("--operator", help="reproduction operator (ops: run only this one)")
    common.add_argument("--problem", type=_list, help="comma-separated problems or environments")
    common.add_argument("--alpha", type=float, help="APD penalty exponent")
    common.add_argument("--fr", type=float, help="reference-vector adaptation frequency")
    common.add_argument("--lattice-h", type=int, dest="lattice_h", help="simplex lattice density")
    common.add_argument("--lanes", type=int, default=1, help="worker threads for data-parallel kernels")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="tensorrvea", description=__doc__)
    sub = parser.add_subparsers(dest="family", required=True)
    for family in FAMILIES:
        sub.add_parser(family, parents=[common], help=_HELP[family], description=_HELP[family])
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    over = {
        "seed": args.seed,
        "reps": args.reps,
        "gens": args.gens,
        "alpha": args.alpha,
        "fr": args.fr,
        "lattice_h": args.lattice_h,
        "problems": args.problem,
        "operator": args.operator,
    }
    if args.family == "scale":
        over["pop_sizes"] = [args.pop] if args.pop is not None else None
        over["dims"] = [args.dim] if args.dim is not None else None
    else:
        over["pop"] = args.pop
        over["dim"] = args.dim
    if args.family == "ops" and args.operator is not None:
        over["operators"] = [args.operator]
    return over


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        file_values = load_file(args.config) if args.config else {}
        cfg = build_config(args.family, file_values, _overrides(args))
        T.set_lanes(args.lanes)
        out = prepare_out(args.out)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"tensorrvea {args.family}: {exc}", file=sys.stderr)
        return 2

    if args.family == "verify":
        _, ok = COMMANDS["verify"](cfg, out)
        for row in read_csv(out / "verify.csv"):
            print(f"{row['suite']:<10} {row['checked']:>4} instances checked, {row['failures']} failed  {row['status'].upper()}")
        if not ok:
            print(f"mismatching instances written to {out / 'verify_failures.json'}", file=sys.stderr)
        return 0 if ok else 1

    COMMANDS[args.family](cfg, out)
    print(f"{args.family}: results written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
