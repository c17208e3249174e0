"""Command-line experiment runner.

``run`` executes a single config file (honoring its repetitions) and
``sweep`` executes every ``*.json`` config in a directory.  Results land in
``results.csv`` under the output directory; lifecycle events go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import CSV_COLUMNS, ExperimentConfig, sweep, write_csv


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.mode is not None:
        config = replace(config, mode=args.mode)
    if args.topology is not None:
        kind, _, variant = args.topology.partition(":")
        config = replace(config, topology=kind,
                         variant=int(variant) if variant else 0)
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="distcamtrack",
        description="distributed multi-camera tracking experiments")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log per-frame tracker lifecycle events")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("config", type=Path, help="JSON experiment config")
    run_p.add_argument("--seed", type=int, default=None, help="override the seed")
    run_p.add_argument("--mode", default=None,
                       choices=("dkf", "dkf+lda", "dkf+lda+dtm"),
                       help="override the pipeline mode")
    run_p.add_argument("--topology", default=None,
                       help="override the topology, e.g. ring or ring:2")
    run_p.add_argument("--out", type=Path, default=Path("."),
                       help="directory for results.csv")

    sweep_p = sub.add_parser("sweep", help="run every config in a directory")
    sweep_p.add_argument("config_dir", type=Path)
    sweep_p.add_argument("--jobs", type=int, default=1,
                         help="parallel worker processes")
    sweep_p.add_argument("--out", type=Path, default=Path("."))

    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        config = _apply_overrides(ExperimentConfig.from_file(args.config), args)
        rows = sweep([config])
    else:
        paths = sorted(args.config_dir.glob("*.json"))
        if not paths:
            parser.error(f"no *.json configs found in {args.config_dir}")
        configs = [ExperimentConfig.from_file(p) for p in paths]
        rows = sweep(configs, jobs=args.jobs)

    out_path = args.out / "results.csv"
    write_csv(rows, out_path)
    print(",".join(CSV_COLUMNS))
    for row in rows:
        print(",".join(row))
    print(f"wrote {out_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
