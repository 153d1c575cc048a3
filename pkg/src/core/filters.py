"""
Node-localized polynomial spectral filters and their class-oriented variants.

Every filter here has the same shape: row i of the output is
Σ_k Ψ[i, k] · (p̂_k(L) X)[i, :], i.e. node i reads the k-th polynomial
response with its own coefficient. The class variants insert a diagonal
spectral weighting between U and p̂_k(Λ): eigenvalue weights γ_c (V) or
eigenvector attention α_c (E).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.config import MAX_POLYNOMIAL_ORDER, BasisKind
from src.core.errors import DegenerateVectorError
from src.core.spectral import SpectralBasis

logger = logging.getLogger(__name__)

SOFTPLUS_IDENTITY = float(np.log(np.e - 1.0))  # softplus(x) == 1


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


@dataclass(frozen=True)
class PolynomialFilterBank:
    """
    Per-node coefficients Ψ (n × (K+1)) of a K-order polynomial filter.

    lambda_max scales the Chebyshev operator; None resolves it from the graph
    the bank is applied to, so L̃ = 2L/λ_max − I stays inside [-1, 1].
    """

    psi: np.ndarray
    basis_kind: BasisKind = "chebyshev"
    lambda_max: Optional[float] = None

    def __post_init__(self):
        if self.psi.ndim != 2:
            raise ValueError(f"psi must be 2-D, got shape {self.psi.shape}")
        if not np.all(np.isfinite(self.psi)):
            raise ValueError("psi contains non-finite coefficients")
        if self.basis_kind not in ("chebyshev", "monomial"):
            raise ValueError(f"Unknown basis kind {self.basis_kind!r}")
        if self.lambda_max is not None and self.lambda_max <= 0:
            raise ValueError("lambda_max must be positive")

    @property
    def K(self) -> int:
        return self.psi.shape[1] - 1

    @classmethod
    def identity(cls, n: int, K: int, **kwargs) -> "PolynomialFilterBank":
        """Ψ with only the order-0 column set: the filter passes X through."""
        psi = np.zeros((n, K + 1))
        psi[:, 0] = 1.0
        return cls(psi=psi, **kwargs)

    @classmethod
    def shared(cls, coefficients, n: int, **kwargs) -> "PolynomialFilterBank":
        """Row-constant Ψ: one globally shared polynomial filter."""
        row = np.asarray(coefficients, dtype=np.float64)
        return cls(psi=np.tile(row, (n, 1)), **kwargs)


@dataclass(frozen=True)
class ClassSpectralWeights:
    """Raw parameters ρ (C × n); γ_c(λ_l) = softplus(ρ[c, l]) > 0."""

    raw: np.ndarray

    @classmethod
    def identity(cls, num_classes: int, n: int) -> "ClassSpectralWeights":
        return cls(raw=np.full((num_classes, n), SOFTPLUS_IDENTITY))

    def gamma(self, c: int) -> np.ndarray:
        return softplus(self.raw[c])


@dataclass(frozen=True)
class EigenvectorAttention:
    """Diagonal attention α_c over eigenvectors; raw (C × n) values are the diagonal."""

    raw: np.ndarray

    @classmethod
    def identity(cls, num_classes: int, n: int) -> "EigenvectorAttention":
        return cls(raw=np.ones((num_classes, n)))

    def alpha(self, c: int) -> np.ndarray:
        return np.asarray(self.raw[c], dtype=np.float64)


def spectral_bound(L: np.ndarray) -> float:
    """Gershgorin bound 2·max(deg) ≥ λ_max(L); 2.0 for an edgeless graph."""
    bound = 2.0 * float(np.max(np.diag(L))) if len(L) else 0.0
    return bound if bound > 0 else 2.0


def _check_order(K: int) -> None:
    if not 0 <= K <= MAX_POLYNOMIAL_ORDER:
        raise ValueError(f"Polynomial order K={K} outside [0, {MAX_POLYNOMIAL_ORDER}]")


def polynomial_basis_stack(
    L,
    X,
    K: int,
    kind: BasisKind = "chebyshev",
    lambda_max: Optional[float] = None,
) -> list[np.ndarray]:
    """
    [p̂_0(L)X, …, p̂_K(L)X].

    monomial:  p̂_k(L)X = LᵏX
    chebyshev: T_0 = X, T_1 = L̃X, T_k = 2L̃T_{k−1} − T_{k−2} with L̃ = 2L/λ_max − I
    """
    _check_order(K)
    L = np.asarray(L, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if L.shape[0] != X.shape[0]:
        raise ValueError(f"L has {L.shape[0]} nodes, X has {X.shape[0]} rows")

    if kind == "monomial":
        operator = L
    elif kind == "chebyshev":
        lam = spectral_bound(L) if lambda_max is None else float(lambda_max)
        operator = 2.0 * L / lam - np.eye(L.shape[0])
    else:
        raise ValueError(f"Unknown basis kind {kind!r}")

    stack = [X]
    if K >= 1:
        stack.append(operator @ X)
    for _ in range(2, K + 1):
        if kind == "monomial":
            stack.append(operator @ stack[-1])
        else:
            stack.append(2.0 * operator @ stack[-1] - stack[-2])
    return stack


def polynomial_response(
    eigenvalues: np.ndarray,
    K: int,
    kind: BasisKind = "chebyshev",
    lambda_max: Optional[float] = None,
) -> np.ndarray:
    """P[l, k] = p̂_k(λ_l), the spectral counterpart of polynomial_basis_stack."""
    _check_order(K)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if kind == "monomial":
        x = lam
    elif kind == "chebyshev":
        bound = lambda_max if lambda_max is not None else (float(lam.max()) if lam.size else 0.0)
        bound = bound if bound > 0 else 2.0
        x = 2.0 * lam / bound - 1.0
    else:
        raise ValueError(f"Unknown basis kind {kind!r}")

    columns = [np.ones_like(lam)]
    if K >= 1:
        columns.append(x.copy())
    for _ in range(2, K + 1):
        columns.append(x * columns[-1] if kind == "monomial" else 2.0 * x * columns[-1] - columns[-2])
    return np.column_stack(columns) if lam.size else np.zeros((0, K + 1))


def combine_rows(psi: np.ndarray, responses: list[np.ndarray]) -> np.ndarray:
    """Row i of the result is Σ_k psi[i, k] · responses[k][i, :]; a single psi row is shared by all nodes."""
    if psi.shape[1] != len(responses):
        raise ValueError(f"psi has {psi.shape[1]} columns for {len(responses)} polynomial terms")
    if psi.shape[0] not in (1, responses[0].shape[0]):
        raise ValueError(f"psi has {psi.shape[0]} rows, signal has {responses[0].shape[0]}")
    out = np.zeros_like(responses[0])
    for k, response in enumerate(responses):
        out += psi[:, k:k + 1] * response
    return out


def localized_filter_output(bank: PolynomialFilterBank, L, X) -> np.ndarray:
    """Z[i, :] = Σ_k Ψ[i, k] · (p̂_k(L) X)[i, :]."""
    stack = polynomial_basis_stack(L, X, bank.K, bank.basis_kind, bank.lambda_max)
    return combine_rows(bank.psi, stack)


def spectral_composite_terms(
    basis: SpectralBasis,
    weights: np.ndarray,
    X: np.ndarray,
    K: int,
    kind: BasisKind,
    lambda_max: Optional[float],
) -> list[np.ndarray]:
    """[U diag(w ⊙ p̂_k(λ)) Uᵀ X for k = 0..K]."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != basis.n:
        raise ValueError(f"X has {X.shape[0]} rows, basis has {basis.n} nodes")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (basis.size,):
        raise ValueError(f"spectral weights have shape {weights.shape}, expected ({basis.size},)")
    P = polynomial_response(basis.eigenvalues, K, kind, lambda_max)
    coeffs = basis.U.T @ X
    return [basis.U @ ((weights * P[:, k])[:, None] * coeffs) for k in range(K + 1)]


def cfgnn_v_forward(
    bank: PolynomialFilterBank,
    gamma: ClassSpectralWeights,
    c: int,
    basis: SpectralBasis,
    X,
) -> np.ndarray:
    """Z_i = δ_i Σ_k Ψ_{i,k} U γ_c(Λ) p̂_k(Λ) Uᵀ X (eigenvalue-weighted composite filter)."""
    terms = spectral_composite_terms(basis, gamma.gamma(c), X, bank.K, bank.basis_kind, bank.lambda_max)
    return combine_rows(bank.psi, terms)


def cfgnn_e_forward(
    bank: PolynomialFilterBank,
    alpha: EigenvectorAttention,
    c: int,
    basis: SpectralBasis,
    X,
) -> np.ndarray:
    """Z_i = δ_i Σ_k Ψ_{i,k} U α_c p̂_k(Λ) Uᵀ X (eigenvector-attention composite filter)."""
    terms = spectral_composite_terms(basis, alpha.alpha(c), X, bank.K, bank.basis_kind, bank.lambda_max)
    return combine_rows(bank.psi, terms)


def node_filter_response(basis: SpectralBasis, g_hat, i: int) -> np.ndarray:
    """Exact node-localized response ĝ_i(λ_l) = √n · u_l(i) · ĝ(λ_l)."""
    if not 0 <= i < basis.n:
        raise IndexError(f"node {i} out of range for {basis.n} nodes")
    return np.sqrt(basis.n) * basis.U[i, :] * np.asarray(g_hat, dtype=np.float64)


def node_adaptive_coeffs(basis: SpectralBasis, x_i: float, x_hat, g_hat) -> np.ndarray:
    """
    Approximate node filter g̃_i(λ_l) = √n · (x_i · q_l) · ĝ(λ_l).

    q is the Moore–Penrose pseudoinverse of the row vector x̂, q = x̂ᵀ/‖x̂‖²,
    which stands in for U's i-th row; the approximation is exact when
    U[i, :] = x_i · q.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    norm_sq = float(x_hat @ x_hat)
    if norm_sq == 0.0:
        raise DegenerateVectorError("Signal spectrum is zero; the pseudoinverse row is undefined")
    q = x_hat / norm_sq
    return np.sqrt(basis.n) * (float(x_i) * q) * np.asarray(g_hat, dtype=np.float64)


def principal_channel(X: np.ndarray) -> np.ndarray:
    """First principal feature channel of a d-dimensional signal, used by node_adaptive_coeffs."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return X
    centered = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0] if vt.size else np.ones(X.shape[1])
    pivot = int(np.argmax(np.abs(direction)))
    if direction[pivot] < 0:
        direction = -direction
    return X @ direction
