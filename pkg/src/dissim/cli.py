"""``dissim`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .channels import ValidationError
from .experiments import EXPERIMENTS, load_config, run

log = logging.getLogger("dissim")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dissim",
        description="Driven-dissipative lattice and Hubbard-atom simulations with Kraus channels.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="INI file with parameter sections (defaults used when omitted)")
    parser.add_argument("--out", default=".", help="output directory for CSV files (default: current directory)")
    parser.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    parser.add_argument("--shots", type=int, help="measurement shots per step, 0 for exact probabilities")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.experiment, args.config, out=args.out, seed=args.seed, shots=args.shots)
        paths, ok = run(cfg)
    except ValidationError as exc:
        print(f"dissim: configuration error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
        if args.experiment == "verify":
            sys.stdout.write(path.read_text())
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
