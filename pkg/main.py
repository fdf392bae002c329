#!/usr/bin/env python3
"""
Jump-diffusion regularity toolkit: CLI entry point.

Usage:
    python main.py simulate --config data/sample/stable_like.cfg
    python main.py holder --config data/sample/brownian.cfg --out out/brownian
    python main.py spectrum --config data/sample/levy_diffusion.cfg --mode theory
    python main.py tangent --config data/sample/variable_index.cfg --threads 4 --progress
    python main.py check-admissible --config data/sample/nonsymmetric.cfg --json

Exit status: 0 success, 1 invalid configuration or model, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from src.config import ConfigError, load_config
from src.pipeline import EXIT_INVALID, SUBCOMMANDS, run_subcommand


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _threads(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Jump-diffusion simulation and regularity analysis",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("command", choices=SUBCOMMANDS, help="Analysis to run")
    parser.add_argument("--config", required=True, help="Path to the run configuration")
    parser.add_argument("--out", help="Output directory (overrides run.output_dir)")
    parser.add_argument("--seed", type=_seed, help="Master seed (overrides run.master_seed)")
    parser.add_argument("--threads", type=_threads, help="Worker threads; results do not depend on it")
    parser.add_argument("--mode", choices=("theory", "empirical"), help="Spectrum mode (overrides spectrum.mode)")
    parser.add_argument("--json", action="store_true", help="Print the summary document instead of one line")
    parser.add_argument("--progress", action="store_true", help="Show progress bars for long ensembles")
    parser.add_argument(
        "--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="Logging level"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, output_dir=args.out, mode=args.mode, threads=args.threads
        )
    except ConfigError as exc:
        print(f"[{args.command}] invalid: {exc}")
        return EXIT_INVALID

    summary = run_subcommand(args.command, cfg, progress=args.progress, as_json=args.json)
    return summary.status


if __name__ == "__main__":
    sys.exit(main())
