"""Command-line entry points for the Monte-Carlo harness."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    PRESETS,
    ExperimentConfig,
    default_out_dir,
    emit_csv,
    load_table,
    preset_config,
    run_mc,
    summarize,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oabandit",
        description="Monte-Carlo bandit experiments with an external observer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid and persist CSVs")
    run.add_argument("--config", help="flat JSON config file")
    run.add_argument("--preset", choices=sorted(PRESETS),
                     help="built-in configuration (config file keys override it)")
    run.add_argument("--workers", type=int, default=1,
                     help="episode-level worker processes (default 1)")
    run.add_argument("--out", help="output directory "
                     "(default: config out_dir, then $OABANDIT_OUT, then ./results)")

    summ = sub.add_parser("summarize", help="report on a persisted experiment")
    summ.add_argument("--in", dest="in_dir", required=True,
                      help="directory produced by `run`")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if not args.config and not args.preset:
        raise ValueError("provide --config and/or --preset")
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a flat JSON object")
        overrides = doc
    if args.preset:
        return preset_config(args.preset, overrides)
    return ExperimentConfig.from_dict(overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _resolve_config(args)
            out_dir = args.out or config.out_dir or default_out_dir()
            table = run_mc(config, workers=args.workers)
            paths = emit_csv(table, out_dir)
            print(summarize(table))
            print(f"\nwrote {', '.join(sorted(paths.values()))}")
        elif args.command == "summarize":
            print(summarize(load_table(args.in_dir)))
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
