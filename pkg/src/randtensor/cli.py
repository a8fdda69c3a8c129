"""Command-line entry point.

Usage:

    randtensor --config experiment.yaml [--seed U64] [--out DIR]
               [--workers N] [--cell COORDS]

The config file picks the command (verify-wick, verify-merging, bound-sweep,
decoupling, khintchine, replay); --seed and --out override the corresponding
config fields, --cell restricts execution or replay to a single grid cell.
Exit status is 0 only when every gate of the selected command passes.
"""

from __future__ import annotations

import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randtensor",
        description="Moment-norm experiments for renormalized Gaussian tensor series.")
    parser.add_argument("--config", required=True, metavar="<path>",
                        help="YAML experiment description")
    parser.add_argument("--seed", type=int, default=None, metavar="<u64>",
                        help="override the config's master seed")
    parser.add_argument("--out", default=None, metavar="<dir>",
                        help="override the config's output directory")
    parser.add_argument("--workers", type=int, default=1, metavar="<n>",
                        help="worker processes for cell execution (default 1)")
    parser.add_argument("--cell", default=None, metavar="<coords>",
                        help="single cell, e.g. dense-gaussian:d1:k2:N8:p4")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .config import ConfigError, load_config
    from .runner import RunError, run

    try:
        config = load_config(args.config, seed_override=args.seed,
                             output_override=args.out)
        if args.workers < 1:
            raise RunError("--workers must be >= 1")
        result = run(config, workers=args.workers, only_cell=args.cell)
    except (ConfigError, RunError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    for line in result.summary_lines:
        print(line)
    for name, passed in result.gates.items():
        print(f"gate {name}: {'pass' if passed else 'FAIL'}")
    if result.records:
        print(f"{len(result.records)} record(s) in {config.output}/results.csv")
    for path in result.figures:
        print(f"figure: {path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
