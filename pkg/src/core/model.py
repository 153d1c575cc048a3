"""
Class-branch spectral GNN: forward pass, class-weighted loss and manual
reverse-mode gradients.

Every layer owns one branch per class (a single branch for the global
baseline). Branch b at layer l computes

    H_b = ReLU( Σ_k Ψ_b[:, k] ⊙ U diag(w_b ⊙ p̂_k(λ)) Uᵀ (H_b_prev W_l) )

with W_l shared across branches and w_b the branch's spectral weighting
(ones for base/global, softplus(ρ_b) for V, α_b for E). The head scores
class c from branch c only; the global baseline scores every class from
its single branch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.core.config import (
    CLASS_WEIGHT_MAX,
    CLASS_WEIGHT_MIN,
    PROBABILITY_FLOOR,
    VARIANTS,
    BasisKind,
    Variant,
)
from src.core.errors import DivergenceError
from src.core.filters import (
    SOFTPLUS_IDENTITY,
    combine_rows,
    polynomial_response,
    sigmoid,
    softplus,
    spectral_composite_terms,
)
from src.core.spectral import SpectralBasis

logger = logging.getLogger(__name__)

PSI_INIT_STD = 0.1


@dataclass(frozen=True)
class Prediction:
    """Row-stochastic class probabilities and their argmax labels."""

    probs: np.ndarray
    labels: np.ndarray


@dataclass
class CFGNNModel:
    """Hyper-parameters plus the named parameter tensors θ."""

    variant: Variant
    num_layers: int
    hidden_dim: int
    num_classes: int
    input_dim: int
    n_nodes: int
    K: int = 2
    basis_kind: BasisKind = "chebyshev"
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def num_branches(self) -> int:
        return 1 if self.variant == "global" else self.num_classes

    @classmethod
    def create(
        cls,
        variant: Variant,
        input_dim: int,
        num_classes: int,
        n_nodes: int,
        rng: np.random.Generator,
        num_layers: int = 2,
        hidden_dim: int = 64,
        K: int = 2,
        basis_kind: BasisKind = "chebyshev",
    ) -> "CFGNNModel":
        """Build a model with freshly initialized parameters."""
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
        model = cls(
            variant=variant,
            num_layers=num_layers,
            hidden_dim=hidden_dim,
            num_classes=num_classes,
            input_dim=input_dim,
            n_nodes=n_nodes,
            K=K,
            basis_kind=basis_kind,
        )
        model.params = model.initial_params(rng)
        return model

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        branches = self.num_branches
        psi_rows = 1 if self.variant == "global" else self.n_nodes
        for layer in range(self.num_layers):
            fan_in = self.input_dim if layer == 0 else self.hidden_dim
            shapes[f"layer{layer}.W"] = (fan_in, self.hidden_dim)
            shapes[f"layer{layer}.psi"] = (branches, psi_rows, self.K + 1)
            if self.variant == "v":
                shapes[f"layer{layer}.rho"] = (branches, self.n_nodes)
            elif self.variant == "e":
                shapes[f"layer{layer}.alpha"] = (branches, self.n_nodes)
        shapes["head.W"] = (self.hidden_dim, self.num_classes)
        shapes["head.b"] = (self.num_classes,)
        return shapes

    def initial_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Glorot-uniform W, Ψ = order-0 pass-through plus N(0, 0.1²) higher orders, γ = α = 1, zero bias."""
        params: dict[str, np.ndarray] = {}
        for name, shape in self.param_shapes().items():
            kind = name.split(".")[-1]
            if kind == "W":
                limit = np.sqrt(6.0 / (shape[0] + shape[1]))
                params[name] = rng.uniform(-limit, limit, size=shape)
            elif kind == "psi":
                psi = rng.normal(0.0, PSI_INIT_STD, size=shape)
                psi[..., 0] = 1.0
                params[name] = psi
            elif kind == "rho":
                params[name] = np.full(shape, SOFTPLUS_IDENTITY)
            elif kind == "alpha":
                params[name] = np.ones(shape)
            else:
                params[name] = np.zeros(shape)
        return params

    def copy(self) -> "CFGNNModel":
        clone = CFGNNModel(**{k: getattr(self, k) for k in (
            "variant", "num_layers", "hidden_dim", "num_classes",
            "input_dim", "n_nodes", "K", "basis_kind",
        )})
        clone.params = {name: value.copy() for name, value in self.params.items()}
        return clone

    def validate(self) -> "CFGNNModel":
        expected = self.param_shapes()
        if set(expected) != set(self.params):
            raise ValueError(
                f"Parameter names {sorted(self.params)} do not match {sorted(expected)}"
            )
        for name, shape in expected.items():
            value = self.params[name]
            if value.shape != shape:
                raise ValueError(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} contains non-finite values")
        return self


@dataclass
class _BranchCache:
    inputs: np.ndarray
    transformed: np.ndarray
    coeffs: np.ndarray
    terms: list[np.ndarray]
    pre_activation: np.ndarray
    output: np.ndarray


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by backward()."""

    basis: SpectralBasis
    response: np.ndarray
    spectral_weights: list[list[np.ndarray]]
    layers: list[list[_BranchCache]]
    scores: np.ndarray
    probs: np.ndarray


def basis_lambda_max(basis: SpectralBasis) -> float:
    """Chebyshev scaling bound: the largest eigenvalue, 2.0 for an edgeless graph."""
    return basis.lambda_max if basis.lambda_max > 0 else 2.0


def _spectral_weights(model: CFGNNModel, layer: int, branch: int) -> np.ndarray:
    if model.variant == "v":
        return softplus(model.params[f"layer{layer}.rho"][branch])
    if model.variant == "e":
        return np.asarray(model.params[f"layer{layer}.alpha"][branch], dtype=np.float64)
    return np.ones(model.n_nodes)


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def forward(model: CFGNNModel, basis: SpectralBasis, X) -> tuple[Prediction, ForwardCache]:
    """Run all layers and the head on the graph described by basis."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape != (model.n_nodes, model.input_dim):
        raise ValueError(f"X has shape {X.shape}, expected ({model.n_nodes}, {model.input_dim})")
    if basis.n != model.n_nodes or basis.size != model.n_nodes:
        raise ValueError(f"basis covers {basis.n} nodes / {basis.size} pairs, model expects {model.n_nodes}")

    lam_max = basis_lambda_max(basis)
    response = polynomial_response(basis.eigenvalues, model.K, model.basis_kind, lam_max)
    layers: list[list[_BranchCache]] = []
    weights_by_layer: list[list[np.ndarray]] = []
    previous = [X] * model.num_branches

    for layer in range(model.num_layers):
        W = model.params[f"layer{layer}.W"]
        psi = model.params[f"layer{layer}.psi"]
        caches: list[_BranchCache] = []
        layer_weights: list[np.ndarray] = []
        for b in range(model.num_branches):
            w = _spectral_weights(model, layer, b)
            transformed = previous[b] @ W
            terms = spectral_composite_terms(basis, w, transformed, model.K, model.basis_kind, lam_max)
            pre = combine_rows(psi[b], terms)
            out = np.maximum(pre, 0.0)
            if not np.all(np.isfinite(out)):
                raise DivergenceError(f"Non-finite activation in layer {layer}, branch {b}")
            caches.append(_BranchCache(
                inputs=previous[b],
                transformed=transformed,
                coeffs=basis.U.T @ transformed,
                terms=terms,
                pre_activation=pre,
                output=out,
            ))
            layer_weights.append(w)
        layers.append(caches)
        weights_by_layer.append(layer_weights)
        previous = [c.output for c in caches]

    W_head = model.params["head.W"]
    b_head = model.params["head.b"]
    if model.variant == "global":
        scores = previous[0] @ W_head + b_head
    else:
        scores = np.column_stack([previous[c] @ W_head[:, c] for c in range(model.num_classes)]) + b_head
    if not np.all(np.isfinite(scores)):
        raise DivergenceError("Non-finite class scores")

    probs = softmax(scores)
    cache = ForwardCache(
        basis=basis,
        response=response,
        spectral_weights=weights_by_layer,
        layers=layers,
        scores=scores,
        probs=probs,
    )
    return Prediction(probs=probs, labels=np.argmax(probs, axis=1)), cache


def global_baseline_forward(model: CFGNNModel, basis: SpectralBasis, X) -> Prediction:
    """Forward pass of the single shared-filter comparison model."""
    if model.variant != "global":
        raise ValueError(f"global_baseline_forward needs a 'global' model, got {model.variant!r}")
    prediction, _ = forward(model, basis, X)
    return prediction


def predict(model: CFGNNModel, basis: SpectralBasis, X) -> Prediction:
    """Argmax prediction; ties go to the lowest class index."""
    prediction, _ = forward(model, basis, X)
    return prediction


def class_weights(labels, num_classes: int, mode: str = "inverse-frequency") -> np.ndarray:
    """w_c = N / (C · N_c) clipped to [0.1, 100]; classes absent from labels get the upper clip."""
    labels = np.asarray(labels, dtype=np.int64)
    if mode == "none":
        return np.ones(num_classes)
    if mode != "inverse-frequency":
        raise ValueError(f"Unknown class weight mode {mode!r}")
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    weights = np.full(num_classes, CLASS_WEIGHT_MAX)
    present = counts > 0
    weights[present] = len(labels) / (num_classes * counts[present])
    return np.clip(weights, CLASS_WEIGHT_MIN, CLASS_WEIGHT_MAX)


def _loss_rows(probs: np.ndarray, index: Optional[np.ndarray]) -> np.ndarray:
    return np.arange(len(probs)) if index is None else np.asarray(index, dtype=np.int64)


def class_weighted_cross_entropy(
    pred: Prediction,
    labels,
    weights,
    index: Optional[np.ndarray] = None,
) -> float:
    """
    −(1/Σ_i w_{y_i}) Σ_i w_{y_i} log max(f_{i,y_i}, 1e-12) over the rows in index
    (all rows when index is None).
    """
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    probs = pred.probs
    if np.any(weights <= 0):
        raise ValueError("class weights must be positive")
    if labels.shape[0] != probs.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {probs.shape[0]} prediction rows")
    if np.any(labels < 0) or np.any(labels >= probs.shape[1]):
        raise ValueError("labels must lie in [0, C)")

    rows = _loss_rows(probs, index)
    if rows.size == 0:
        return 0.0
    y = labels[rows]
    w = weights[y]
    picked = np.maximum(probs[rows, y], PROBABILITY_FLOOR)
    loss = float(-(w * np.log(picked)).sum() / w.sum())
    if not np.isfinite(loss):
        raise DivergenceError("Non-finite loss")
    return loss


def backward(
    model: CFGNNModel,
    cache: Optional[ForwardCache],
    labels,
    weights,
    index: Optional[np.ndarray] = None,
) -> dict[str, np.ndarray]:
    """Gradient of class_weighted_cross_entropy with respect to every parameter."""
    if cache is None:
        raise ValueError("backward() needs the cache of a matching forward() call")
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    probs = cache.probs
    rows = _loss_rows(probs, index)

    d_scores = np.zeros_like(probs)
    if rows.size:
        y = labels[rows]
        w = weights[y]
        scale = w / w.sum()
        onehot = np.zeros((rows.size, model.num_classes))
        onehot[np.arange(rows.size), y] = 1.0
        local = scale[:, None] * (probs[rows] - onehot)
        # clamped rows contribute a constant to the loss
        local[probs[rows, y] <= PROBABILITY_FLOOR] = 0.0
        np.add.at(d_scores, rows, local)
    return backward_from_scores(model, cache, d_scores)


def backward_from_scores(model: CFGNNModel, cache: ForwardCache, d_scores: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate an upstream gradient ∂loss/∂scores through head and layers."""
    grads = {name: np.zeros_like(value) for name, value in model.params.items()}
    U = cache.basis.U
    P = cache.response
    W_head = model.params["head.W"]
    last = [c.output for c in cache.layers[-1]]

    grads["head.b"] = d_scores.sum(axis=0)
    if model.variant == "global":
        grads["head.W"] = last[0].T @ d_scores
        upstream = [d_scores @ W_head.T]
    else:
        for c in range(model.num_classes):
            grads["head.W"][:, c] = last[c].T @ d_scores[:, c]
        upstream = [d_scores[:, c:c + 1] * W_head[:, c][None, :] for c in range(model.num_classes)]

    for layer in reversed(range(model.num_layers)):
        W = model.params[f"layer{layer}.W"]
        psi = model.params[f"layer{layer}.psi"]
        d_psi = grads[f"layer{layer}.psi"]
        d_W = grads[f"layer{layer}.W"]
        next_upstream = []
        for b, branch in enumerate(cache.layers[layer]):
            w = cache.spectral_weights[layer][b]
            d_pre = upstream[b] * (branch.pre_activation > 0.0)
            d_coeffs = np.zeros_like(branch.coeffs)
            d_w = np.zeros(model.n_nodes)
            for k, term in enumerate(branch.terms):
                contribution = (d_pre * term).sum(axis=1)
                d_psi[b, :, k] += contribution.sum() if psi.shape[1] == 1 else contribution
                spectral_grad = U.T @ (psi[b, :, k:k + 1] * d_pre)
                d_coeffs += (w * P[:, k])[:, None] * spectral_grad
                d_w += P[:, k] * (spectral_grad * branch.coeffs).sum(axis=1)

            if model.variant == "v":
                grads[f"layer{layer}.rho"][b] = d_w * sigmoid(model.params[f"layer{layer}.rho"][b])
            elif model.variant == "e":
                grads[f"layer{layer}.alpha"][b] = d_w

            d_transformed = U @ d_coeffs
            d_W += branch.inputs.T @ d_transformed
            next_upstream.append(d_transformed @ W.T)
        upstream = next_upstream

    return grads
