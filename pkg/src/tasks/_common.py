"""Shared helpers for experiment tasks."""

import logging
import time
from pathlib import Path
from typing import Any, Iterable, Optional

from src.cli.schemas import ExperimentConfig
from src.core.data import Dataset, generate_synthetic, load_csv
from src.core.storage import build_manifest_path, content_hash, write_json

logger = logging.getLogger(__name__)


def dataset_inputs(config: ExperimentConfig) -> list[Path]:
    """Input files a command reads, for the manifest hash."""
    if config.dataset is None:
        return []
    paths = [config.dataset.features_path]
    if config.dataset.edges_path is not None:
        paths.append(config.dataset.edges_path)
    return paths


def load_dataset(config: ExperimentConfig, job_id: str) -> Dataset:
    """CSV dataset when configured, else the seeded synthetic generator."""
    if config.dataset is None:
        logger.info(f"[{job_id}] No dataset configured, generating synthetic data (seed={config.seed})")
        return generate_synthetic(config.to_synthetic_config())
    settings = config.dataset
    return load_csv(
        settings.features_path,
        label_column=settings.label_column,
        edges_path=settings.edges_path,
        categorical_columns=settings.categorical_columns,
        normalize=settings.normalize,
        knn_k=settings.knn_k,
    )


def write_manifest(
    out_dir: Path,
    command: str,
    config: ExperimentConfig,
    inputs: Iterable[Path],
    started: float,
    metrics: Optional[dict[str, Any]] = None,
) -> Path:
    """Write manifest.json; wall_clock_seconds is its only run-dependent field."""
    path = build_manifest_path(out_dir)
    write_json(path, {
        "command": command,
        "config": config.model_dump(mode="json"),
        "input_hash": content_hash(inputs),
        "seed": config.seed,
        "wall_clock_seconds": round(time.monotonic() - started, 3),
        "metrics": metrics or {},
    })
    logger.debug(f"Wrote manifest {path}")
    return path
