"""Command-line entry point: ``prospective run|plot|list-experiments``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ConfigError, load

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _seeds(text: str) -> tuple:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("seeds must be a comma-separated list of integers") from None
    if not seeds or any(s < 0 for s in seeds) or len(set(seeds)) != len(seeds):
        raise argparse.ArgumentTypeError("seeds must be distinct non-negative integers")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prospective", description="Prospective-learning experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="path to a YAML experiment config")
    run.add_argument("--seeds", type=_seeds, help="override the config's seeds, e.g. 0,1,2")
    run.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--out-dir", help="output directory (default: the config's output_dir)")
    plot = sub.add_parser("plot", help="plot a curves.csv file as SVG")
    plot.add_argument("csv")
    plot.add_argument("out")
    plot.add_argument("--bayes", type=float, default=0.0)
    plot.add_argument("--chance", type=float, default=0.5)
    plot.add_argument("--title", default="")
    sub.add_parser("list-experiments", help="list the available experiment recipes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-experiments":
        from .experiments import DESCRIPTIONS

        for name, desc in DESCRIPTIONS.items():
            print(f"{name:22s} {desc}")
        return EXIT_OK
    if args.command == "plot":
        from .plotting import plot

        try:
            plot(args.csv, args.out, args.bayes, args.chance, args.title)
        except (OSError, ValueError, KeyError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK

    try:
        cfg = load(args.config)
        if args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"config error: cannot read {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seeds:
        cfg = replace(cfg, seeds=args.seeds)
    from .experiments import run_experiment

    try:
        result = run_experiment(cfg, args.out_dir, args.workers)
    except Exception as e:  # reported via the manifest and the exit code
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {result.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
