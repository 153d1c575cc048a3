"""
Full-graph training loop: adjacency dropout, forward/backward and Adam.

Each epoch draws a dropped-out copy of the sample graph, recomputes its
spectrum and takes one Adam step on the class-weighted loss over the
training nodes. Evaluation always uses the clean graph.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.core.config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, TrainConfig, derive_rng
from src.core.data import Dataset
from src.core.errors import DivergenceError
from src.core.graph_core import Graph, laplacian
from src.core.metrics import cma, confusion, precision_recall_f1
from src.core.model import (
    CFGNNModel,
    backward,
    class_weighted_cross_entropy,
    class_weights,
    forward,
    predict,
)
from src.core.spectral import SpectralBasis, eigendecompose

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment estimates per parameter and the step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    cma: float
    macro_f1: float


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam update. weight_decay · θ is added to the
    gradient before the moment updates.
    """
    if set(params) != set(grads):
        raise ValueError(f"gradient names {sorted(grads)} do not match parameters {sorted(params)}")
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, theta in params.items():
        grad = grads[name]
        if grad.shape != theta.shape:
            raise ValueError(f"gradient for {name} has shape {grad.shape}, expected {theta.shape}")
        g = grad + weight_decay * theta
        m = ADAM_BETA1 * state.m.get(name, np.zeros_like(theta)) + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v.get(name, np.zeros_like(theta)) + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1 ** t)
        v_hat = v / (1.0 - ADAM_BETA2 ** t)
        new_params[name] = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def adjacency_dropout(g: Graph, p: float, rng: np.random.Generator) -> Graph:
    """Drop each undirected edge with probability p; survivors are scaled by 1/(1 − p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if p == 0.0:
        return g
    rows, cols = np.nonzero(np.triu(g.weights, k=1))
    keep = rng.random(len(rows)) >= p
    weights = np.zeros_like(g.weights)
    scaled = g.weights[rows[keep], cols[keep]] / (1.0 - p)
    weights[rows[keep], cols[keep]] = scaled
    weights[cols[keep], rows[keep]] = scaled
    return Graph.from_weights(weights, node_ids=g.node_ids)


def spectral_basis(g: Graph, method: str = "lapack") -> SpectralBasis:
    return eigendecompose(laplacian(g), method=method)


def evaluate_split(model: CFGNNModel, basis: SpectralBasis, ds: Dataset, index: np.ndarray) -> tuple[float, float]:
    """(cmA, macro-F1) of the model on the given node indices."""
    prediction = predict(model, basis, ds.features)
    cm = confusion(ds.labels[index], prediction.labels[index], ds.num_classes)
    return cma(cm), precision_recall_f1(cm).macro_f1


def train(
    model: CFGNNModel,
    dataset: Dataset,
    config: TrainConfig,
    train_idx: np.ndarray,
    eval_idx: Optional[np.ndarray] = None,
) -> tuple[CFGNNModel, list[EpochRecord]]:
    """
    Train a copy of model for config.epochs epochs.

    History records hold the training loss and the cmA / macro-F1 on
    eval_idx (train_idx when not given), measured on the clean graph after
    the epoch's update.
    """
    config.validate()
    tag = f"[train variant={model.variant} seed={config.seed}]"
    train_idx = np.asarray(train_idx, dtype=np.int64)
    eval_idx = train_idx if eval_idx is None else np.asarray(eval_idx, dtype=np.int64)
    trained = model.copy()
    history: list[EpochRecord] = []
    if config.epochs == 0:
        return trained, history

    weights = class_weights(dataset.labels[train_idx], dataset.num_classes, config.class_weight_mode)
    rng = derive_rng(config.seed, "dropout")
    clean_basis = spectral_basis(dataset.graph, config.eigensolver)
    state = AdamState()
    started = time.monotonic()
    logger.info(
        f"{tag} Starting: {config.epochs} epochs, {len(train_idx)} train / {len(eval_idx)} eval nodes, "
        f"dropout={config.adjacency_dropout}"
    )

    for epoch in range(1, config.epochs + 1):
        if config.adjacency_dropout > 0:
            dropped = adjacency_dropout(dataset.graph, config.adjacency_dropout, rng)
            basis = spectral_basis(dropped, config.eigensolver)
        else:
            basis = clean_basis

        try:
            prediction, cache = forward(trained, basis, dataset.features)
            loss = class_weighted_cross_entropy(prediction, dataset.labels, weights, train_idx)
            grads = backward(trained, cache, dataset.labels, weights, train_idx)
        except DivergenceError as exc:
            raise DivergenceError(str(exc), epoch=epoch) from exc

        trained.params, state = adam_step(
            state, trained.params, grads, config.learning_rate, config.weight_decay
        )
        if not all(np.all(np.isfinite(p)) for p in trained.params.values()):
            raise DivergenceError("Non-finite parameters after update", epoch=epoch)

        try:
            epoch_cma, epoch_f1 = evaluate_split(trained, clean_basis, dataset, eval_idx)
        except DivergenceError as exc:
            raise DivergenceError(str(exc), epoch=epoch) from exc
        history.append(EpochRecord(epoch=epoch, loss=loss, cma=epoch_cma, macro_f1=epoch_f1))

        logger.debug(f"{tag} epoch={epoch} loss={loss:.6f} cma={epoch_cma:.4f} macro_f1={epoch_f1:.4f}")
        if config.log_every and epoch % config.log_every == 0:
            logger.info(f"{tag} Epoch {epoch}/{config.epochs}: loss={loss:.4f}, cmA={epoch_cma:.4f}")

    elapsed = time.monotonic() - started
    logger.info(f"{tag} Finished in {elapsed:.1f}s: final loss={history[-1].loss:.4f}, cmA={history[-1].cma:.4f}")
    return trained, history
