"""
Experiment harness entry point.

Usage:
    python main.py generate --seed 7 --out runs/synthetic
    python main.py train --config experiment.json --variant v
    python main.py evaluate --config experiment.json
    python main.py sweep-ir --config experiment.json --ratios 0.1,0.5,0.9
    python main.py spectra --out runs/spectra

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure
or unwritable output.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from src.cli.schemas import ExperimentConfig, load_experiment_config
from src.core.config import VARIANTS
from src.core.errors import ConfigError, DataError, NumericalError, StorageError
from src.core.run_logging import attach_run_log, configure_logging, detach_run_log
from src.tasks.experiment_tasks import (
    cmd_evaluate,
    cmd_generate,
    cmd_spectra,
    cmd_sweep_ir,
    cmd_train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4  # also unwritable output

COMMANDS: dict[str, Callable[..., dict]] = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep-ir": cmd_sweep_ir,
    "spectra": cmd_spectra,
}


def parse_ratios(text: str) -> list[float]:
    try:
        ratios = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be a comma-separated list of numbers, got {text!r}")
    if not ratios:
        raise argparse.ArgumentTypeError("ratios must not be empty")
    return ratios


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    common.add_argument("--seed", type=int, default=None, help="Seed for every randomness stream")
    common.add_argument("--variant", choices=VARIANTS, default=None, help="Model variant")
    common.add_argument("--out", type=Path, default=None, help="Output directory")
    common.add_argument("--log-level", default=None, help="Root log level (default: CFGNN_LOG_LEVEL or INFO)")

    parser = argparse.ArgumentParser(
        prog="cfgnn",
        description="Class-Fourier GNN experiments for imbalanced network failure classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="Write the seeded synthetic dataset")
    sub.add_parser("train", parents=[common], help="Train a model and write checkpoint + history")
    evaluate = sub.add_parser("evaluate", parents=[common], help="Evaluate a checkpoint on the test split")
    evaluate.add_argument("--checkpoint", type=Path, default=None, help="Checkpoint file")
    sweep = sub.add_parser("sweep-ir", parents=[common], help="Imbalance-ratio sweep table")
    sweep.add_argument("--ratios", type=parse_ratios, default=None, help="Comma-separated ratios, e.g. 0.1,0.5")
    sub.add_parser("spectra", parents=[common], help="Dump the sample graph's Laplacian spectrum")
    return parser


def resolve_config(args: argparse.Namespace, cwd: Optional[Path] = None) -> ExperimentConfig:
    """Config file values, overridden by flags, with absolute paths."""
    config = load_experiment_config(args.config)
    base_dir = args.config.resolve().parent if args.config is not None else (cwd or Path.cwd())
    config = config.resolve_paths(base_dir)

    update: dict = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must lie in [0, 2^64), got {args.seed}")
        update["seed"] = args.seed
    if args.variant is not None:
        update["variant"] = args.variant
    if args.out is not None:
        update["output_dir"] = (cwd or Path.cwd()) / args.out if not args.out.is_absolute() else args.out
    if getattr(args, "checkpoint", None) is not None:
        update["checkpoint_path"] = args.checkpoint.resolve()
    if getattr(args, "ratios", None) is not None:
        update["sweep"] = config.sweep.model_copy(update={"ratios": args.ratios})
    return config.model_copy(update=update) if update else config


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        config = resolve_config(args)
    except ConfigError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_CONFIG

    handler = None
    try:
        handler = attach_run_log(config.output_dir)
        summary = COMMANDS[args.command](config)
        logger.info(f"{args.command} finished: {summary}")
        return EXIT_OK
    except ConfigError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_CONFIG
    except DataError as exc:
        logger.error(f"Data error: {exc}")
        return EXIT_DATA
    except NumericalError as exc:
        logger.error(f"Numerical failure: {exc}")
        return EXIT_NUMERIC
    except StorageError as exc:
        logger.error(f"Output error: {exc}")
        return EXIT_NUMERIC
    finally:
        detach_run_log(handler)


def main() -> None:
    sys.exit(run())
