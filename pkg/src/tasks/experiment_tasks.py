"""
Experiment pipelines behind the CLI commands.

Each cmd_* function takes a resolved ExperimentConfig, writes its artifacts
into config.output_dir and returns a metric summary. Every artifact except
the manifest's wall-clock field is a pure function of (config, inputs, seed).
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.cli.schemas import ExperimentConfig
from src.core.checkpoint import build_checkpoint, load_checkpoint, save_checkpoint
from src.core.config import derive_rng
from src.core.data import Dataset, imbalance_ratio, resample_imbalance, stratified_split, write_dataset
from src.core.errors import DataError
from src.core.graph_core import laplacian
from src.core.metrics import (
    build_report,
    confusion,
    write_confusion_csv,
    write_report,
    write_scores_csv,
)
from src.core.model import CFGNNModel, predict
from src.core.spectral import eigendecompose, write_spectrum
from src.core.storage import (
    build_checkpoint_path,
    build_confusion_path,
    build_edges_path,
    build_eigenvalues_path,
    build_eigenvectors_path,
    build_features_path,
    build_history_path,
    build_report_path,
    build_scores_path,
    build_sweep_path,
    write_csv,
)
from src.core.training import EpochRecord, spectral_basis, train
from src.tasks._common import dataset_inputs, load_dataset, write_manifest

logger = logging.getLogger(__name__)

HISTORY_HEADER = ("epoch", "loss", "cma", "macro_f1")
SWEEP_HEADER = ("variant", "ratio", "cma", "g_mean", "mcc", "macro_f1", "seed", "status")
ZERO_EIGENVALUE_TOL = 1e-8


def _new_model(config: ExperimentConfig, ds: Dataset, variant: str) -> CFGNNModel:
    train_config = config.to_train_config(variant=variant)
    return CFGNNModel.create(
        variant=variant,
        input_dim=ds.num_features,
        num_classes=ds.num_classes,
        n_nodes=ds.n,
        rng=derive_rng(config.seed, "init"),
        num_layers=train_config.num_layers,
        hidden_dim=train_config.hidden_dim,
        K=train_config.K,
        basis_kind=train_config.basis_kind,
    )


def _history_rows(history: Sequence[EpochRecord]):
    return ([r.epoch, float(r.loss), float(r.cma), float(r.macro_f1)] for r in history)


def cmd_generate(config: ExperimentConfig) -> dict:
    """Generate the seeded synthetic dataset and write features.csv / edges.csv."""
    job_id = f"generate seed={config.seed}"
    started = time.monotonic()
    out_dir = config.output_dir
    ds = load_dataset(config.model_copy(update={"dataset": None}), job_id)

    write_dataset(ds, build_features_path(out_dir), build_edges_path(out_dir))
    counts = ds.class_counts()
    summary = {
        "num_samples": ds.n,
        "num_classes": ds.num_classes,
        "num_edges": ds.graph.edge_count(),
        "class_counts": [int(c) for c in counts],
        "imbalance_ratio": imbalance_ratio(ds.labels),
    }
    write_manifest(out_dir, "generate", config, [], started, summary)
    logger.info(f"[{job_id}] Wrote {ds.n} samples ({int(counts[0])} in {ds.class_names[0]}) to {out_dir}")
    return summary


def cmd_train(config: ExperimentConfig) -> dict:
    """Train the configured variant; writes checkpoint.json, history.csv and the manifest."""
    job_id = f"train variant={config.variant} seed={config.seed}"
    started = time.monotonic()
    out_dir = config.output_dir
    ds = load_dataset(config, job_id)
    train_config = config.to_train_config()
    train_idx, test_idx = stratified_split(ds, config.to_split_spec())

    model = _new_model(config, ds, config.variant)
    trained, history = train(model, ds, train_config, train_idx, test_idx)

    checkpoint = build_checkpoint(trained, ds.class_names, config.seed, config.model_dump(mode="json"))
    save_checkpoint(checkpoint, build_checkpoint_path(out_dir))
    write_csv(build_history_path(out_dir), HISTORY_HEADER, _history_rows(history))

    summary = {"epochs": len(history)}
    if history:
        summary.update(final_loss=history[-1].loss, final_cma=history[-1].cma, final_macro_f1=history[-1].macro_f1)
    write_manifest(out_dir, "train", config, dataset_inputs(config), started, summary)
    logger.info(f"[{job_id}] Training artifacts written to {out_dir}")
    return summary


def cmd_evaluate(config: ExperimentConfig) -> dict:
    """Evaluate a checkpoint on the test split; writes report.json, confusion.csv and scores.csv."""
    job_id = f"evaluate seed={config.seed}"
    started = time.monotonic()
    out_dir = config.output_dir
    checkpoint_path = config.checkpoint_path or build_checkpoint_path(out_dir)
    checkpoint = load_checkpoint(checkpoint_path)
    try:
        model = checkpoint.to_model()
    except ValueError as exc:
        raise DataError(f"Checkpoint {checkpoint_path} is inconsistent: {exc}")

    ds = load_dataset(config, job_id)
    if (model.n_nodes, model.input_dim) != (ds.n, ds.num_features):
        raise DataError(
            f"Checkpoint expects {model.n_nodes} nodes x {model.input_dim} features, "
            f"dataset has {ds.n} x {ds.num_features}"
        )
    if tuple(checkpoint.class_names) != ds.class_names:
        raise DataError(f"Checkpoint classes {checkpoint.class_names} differ from dataset classes {list(ds.class_names)}")

    _, test_idx = stratified_split(ds, config.to_split_spec())
    basis = spectral_basis(ds.graph, config.to_train_config(variant=model.variant).eigensolver)
    prediction = predict(model, basis, ds.features)

    cm = confusion(ds.labels[test_idx], prediction.labels[test_idx], ds.num_classes)
    report = build_report(cm, ds.class_names)
    write_report(report, build_report_path(out_dir))
    write_confusion_csv(cm, ds.class_names, build_confusion_path(out_dir))
    write_scores_csv(prediction.probs, ds.labels, prediction.labels, ds.class_names, test_idx, build_scores_path(out_dir))

    summary = report.summary()
    write_manifest(out_dir, "evaluate", config, [checkpoint_path, *dataset_inputs(config)], started, summary)
    logger.info(f"[{job_id}] cmA={report.cma:.4f} g_mean={report.g_mean:.4f} mcc={report.mcc:.4f} macro_f1={report.scores.macro_f1:.4f}")
    return summary


@dataclass(frozen=True)
class SweepJob:
    variant: str
    ratio: float


def _run_sweep_job(config: ExperimentConfig, ds: Dataset, job: SweepJob) -> list:
    job_id = f"sweep r={job.ratio} variant={job.variant}"
    try:
        resampled = resample_imbalance(ds, job.ratio, config.seed)
        train_idx, test_idx = stratified_split(resampled, config.to_split_spec())
    except DataError as exc:
        logger.warning(f"[{job_id}] Skipped: {exc}")
        return [job.variant, job.ratio, "", "", "", "", config.seed, "infeasible"]

    overrides = {}
    if job.variant == "global" and config.sweep.unweighted_global:
        overrides["class_weight_mode"] = "none"
    train_config = config.to_train_config(variant=job.variant, **overrides)
    model = _new_model(config, resampled, job.variant)
    trained, _ = train(model, resampled, train_config, train_idx, test_idx)

    basis = spectral_basis(resampled.graph, train_config.eigensolver)
    prediction = predict(trained, basis, resampled.features)
    cm = confusion(resampled.labels[test_idx], prediction.labels[test_idx], resampled.num_classes)
    report = build_report(cm, resampled.class_names)
    logger.info(f"[{job_id}] cmA={report.cma:.4f} g_mean={report.g_mean:.4f} mcc={report.mcc:.4f}")
    return [job.variant, job.ratio, report.cma, report.g_mean, report.mcc, report.scores.macro_f1, config.seed, "ok"]


def cmd_sweep_ir(config: ExperimentConfig, ratios: Optional[Sequence[float]] = None) -> dict:
    """
    Resample → train → evaluate for every (variant, ratio) pair.

    Jobs run concurrently on a thread pool; rows are written in
    (variant, ratio) order regardless of completion order.
    """
    job_id = f"sweep seed={config.seed}"
    started = time.monotonic()
    out_dir = config.output_dir
    ratios = list(ratios) if ratios is not None else list(config.sweep.ratios)
    ds = load_dataset(config, job_id)
    jobs = [SweepJob(variant=v, ratio=float(r)) for v in config.sweep.variants for r in ratios]
    logger.info(f"[{job_id}] {len(jobs)} jobs over ratios {ratios}, variants {config.sweep.variants}")

    with ThreadPoolExecutor(max_workers=config.sweep.max_workers) as pool:
        futures = [pool.submit(_run_sweep_job, config, ds, job) for job in jobs]
        rows = [future.result() for future in futures]

    write_csv(build_sweep_path(out_dir), SWEEP_HEADER, rows)
    summary = {
        "jobs": len(rows),
        "infeasible": sum(1 for row in rows if row[-1] == "infeasible"),
    }
    write_manifest(out_dir, "sweep-ir", config, dataset_inputs(config), started, summary)
    logger.info(f"[{job_id}] Sweep table written: {len(rows)} rows ({summary['infeasible']} infeasible)")
    return summary


def cmd_spectra(config: ExperimentConfig) -> dict:
    """Dump the sample graph's Laplacian spectrum (eigenvalues.csv, eigenvectors.csv)."""
    job_id = f"spectra seed={config.seed}"
    started = time.monotonic()
    out_dir = config.output_dir
    ds = load_dataset(config, job_id)
    method = config.train.eigensolver or "auto"
    basis = eigendecompose(laplacian(ds.graph), method=method)
    write_spectrum(basis, build_eigenvalues_path(out_dir), build_eigenvectors_path(out_dir))

    tol = ZERO_EIGENVALUE_TOL * max(1.0, basis.lambda_max)
    zero_count = int(np.sum(np.abs(basis.eigenvalues) <= tol))
    if zero_count > 1:
        logger.warning(f"[{job_id}] Graph is disconnected: {zero_count} near-zero eigenvalues")
    summary = {
        "num_nodes": basis.n,
        "zero_eigenvalues": zero_count,
        "lambda_max": basis.lambda_max,
    }
    write_manifest(out_dir, "spectra", config, dataset_inputs(config), started, summary)
    return summary
