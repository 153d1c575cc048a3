"""
Spectral machinery: eigendecomposition, graph Fourier transforms, the twin
transform on Cartesian product graphs, generalized translation and generic
spectral filtering.

All routines are real-valued; the Laplacians involved are symmetric so the
complex codomain of the transform collapses to ℝ.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from src.core.config import (
    JACOBI_AUTO_MAX_NODES,
    JACOBI_MAX_SWEEPS,
    POWER_ITERATION_EPS,
    POWER_ITERATION_MAX_ITER,
    SYMMETRY_TOLERANCE,
    Eigensolver,
)
from src.core.errors import ConvergenceError, DataError, DegenerateVectorError
from src.core.storage import format_float, read_csv_rows, write_csv

logger = logging.getLogger(__name__)

SpectralResponse = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SpectralBasis:
    """
    Eigenvalues in ascending order with orthonormal eigenvectors as columns.

    A partial basis (from deflation) has fewer columns than rows.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    group_tol: float = 0.0
    multiplicity_groups: tuple[tuple[int, ...], ...] = field(default=(), compare=False)

    @classmethod
    def build(cls, eigenvalues, vectors, group_tol: float) -> "SpectralBasis":
        values = np.asarray(eigenvalues, dtype=np.float64)
        vecs = np.asarray(vectors, dtype=np.float64)
        values.setflags(write=False)
        vecs.setflags(write=False)
        return cls(
            eigenvalues=values,
            vectors=vecs,
            group_tol=group_tol,
            multiplicity_groups=_group_indices(values, group_tol),
        )

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def size(self) -> int:
        return self.vectors.shape[1]

    @property
    def U(self) -> np.ndarray:
        return self.vectors

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1]) if self.size else 0.0


def _group_indices(values: np.ndarray, tol: float) -> tuple[tuple[int, ...], ...]:
    """Chain consecutive sorted eigenvalues closer than tol into groups."""
    groups: list[list[int]] = []
    for idx, value in enumerate(values):
        if groups and abs(value - values[groups[-1][-1]]) <= tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    return tuple(tuple(g) for g in groups)


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry (lowest index on ties) is positive."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > SYMMETRY_TOLERANCE * max(1.0, np.max(np.abs(m))):
        raise ValueError("Matrix is not symmetric within tolerance")
    return (m + m.T) / 2.0


def jacobi_eigh(m: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigenvalue algorithm for a symmetric matrix.

    Returns unsorted (eigenvalues, eigenvectors). Each rotation zeroes one
    off-diagonal pair; sweeps repeat until the off-diagonal norm is
    negligible relative to ‖m‖_F.
    """
    a = np.array(m, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), v

    threshold = 1e-14 * scale
    for sweep in range(1, max_sweeps + 1):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= threshold:
            logger.debug(f"Jacobi converged after {sweep - 1} sweeps (n={n})")
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
    if off <= threshold:
        return np.diag(a).copy(), v
    raise ConvergenceError("jacobi_eigh", max_sweeps)


def eigendecompose(
    m,
    method: Eigensolver = "auto",
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> SpectralBasis:
    """
    Full eigendecomposition of a symmetric matrix.

    Eigenvalues come back ascending and every eigenvector carries the
    deterministic sign convention, whichever solver produced it.
    """
    sym = _check_symmetric(m)
    n = sym.shape[0]
    if method == "auto":
        method = "jacobi" if n <= JACOBI_AUTO_MAX_NODES else "lapack"

    if method == "jacobi":
        values, vectors = jacobi_eigh(sym, max_sweeps=max_sweeps)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(sym)
    else:
        raise ValueError(f"Unknown eigensolver {method!r}")

    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = _canonical_signs(vectors[:, order])
    group_tol = 1e-8 * float(np.linalg.norm(sym))
    return SpectralBasis.build(values, vectors, group_tol)


def power_iteration(
    m,
    v0,
    eps: float = POWER_ITERATION_EPS,
    max_iter: int = POWER_ITERATION_MAX_ITER,
    on_iterate: Optional[Callable[[int, float, float], None]] = None,
) -> tuple[float, np.ndarray, int]:
    """
    Dominant eigenpair by power iteration.

    Iterates w = A v, λ = (w·v)/‖v‖, v ← w/‖w‖ and stops once
    ‖v⁽ᵗ⁺¹⁾ − v⁽ᵗ⁾‖ < eps. Each new iterate is sign-aligned with the previous
    one so a negative dominant eigenvalue does not flip the vector forever.

    on_iterate(t, λ⁽ᵗ⁾, ‖A v⁽ᵗ⁾ − λ⁽ᵗ⁾ v⁽ᵗ⁾‖) is called once per iteration.

    Returns (eigenvalue, eigenvector, iterations); the eigenvalue is the
    Rayleigh quotient of the returned vector.
    """
    a = np.asarray(m, dtype=np.float64)
    v = np.asarray(v0, dtype=np.float64).copy()
    if eps <= 0:
        raise ValueError("eps must be positive")
    if v.shape != (a.shape[0],):
        raise ValueError(f"v0 has shape {v.shape}, expected ({a.shape[0]},)")
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise ValueError("v0 must have unit norm")

    for t in range(1, max_iter + 1):
        w = a @ v
        w_norm = np.linalg.norm(w)
        if w_norm <= np.finfo(np.float64).tiny:
            raise DegenerateVectorError(
                "Power iteration produced a zero vector; v0 is orthogonal to the dominant eigenspace"
            )
        estimate = float(w @ v) / np.linalg.norm(v)
        if on_iterate is not None:
            on_iterate(t, estimate, float(np.linalg.norm(w - estimate * v)))

        v_next = w / w_norm
        if v_next @ v < 0:
            v_next = -v_next
        if np.linalg.norm(v_next - v) < eps:
            return float(v_next @ (a @ v_next)), v_next, t
        v = v_next

    raise ConvergenceError("power_iteration", max_iter)


def deflated_spectrum(
    m,
    k: int,
    eps: float = POWER_ITERATION_EPS,
    max_iter: int = POWER_ITERATION_MAX_ITER,
    rng: Optional[np.random.Generator] = None,
) -> SpectralBasis:
    """
    k dominant eigenpairs by repeated power iteration with deflation
    A ← A − λ v vᵀ. Pairs are returned in ascending eigenvalue order.
    """
    a = _check_symmetric(m).copy()
    n = a.shape[0]
    if not 0 <= k <= n:
        raise ValueError(f"k={k} must lie in [0, {n}]")
    rng = rng if rng is not None else np.random.default_rng(0)

    values: list[float] = []
    vectors: list[np.ndarray] = []
    for j in range(k):
        v0 = rng.standard_normal(n)
        v0 /= np.linalg.norm(v0)
        value, vector, iterations = power_iteration(a, v0, eps=eps, max_iter=max_iter)
        logger.debug(f"Deflation pair {j}: λ={value:.6g} after {iterations} iterations")
        values.append(value)
        vectors.append(vector)
        a = a - value * np.outer(vector, vector)

    if not k:
        return SpectralBasis.build(np.zeros(0), np.zeros((n, 0)), 0.0)
    order = np.argsort(values, kind="stable")
    stacked = _canonical_signs(np.column_stack(vectors)[:, order])
    return SpectralBasis.build(np.asarray(values)[order], stacked, 1e-8 * float(np.linalg.norm(m)))


def _check_rows(basis: SpectralBasis, x: np.ndarray, what: str) -> None:
    if x.shape[0] != basis.n:
        raise ValueError(f"{what} has {x.shape[0]} rows, basis has {basis.n} nodes")


def gft(basis: SpectralBasis, f) -> np.ndarray:
    """f̂ = Uᵀ f for a node signal (n,) or feature matrix (n, d)."""
    f = np.asarray(f, dtype=np.float64)
    _check_rows(basis, f, "signal")
    return basis.U.T @ f


def igft(basis: SpectralBasis, s) -> np.ndarray:
    """f = U f̂."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[0] != basis.size:
        raise ValueError(f"spectrum has {s.shape[0]} coefficients, basis has {basis.size}")
    return basis.U @ s


def twin_gft(b1: SpectralBasis, b2: SpectralBasis, F) -> np.ndarray:
    """F̂ = U₁ᵀ F U₂ for a signal on the product graph laid out as an N1×N2 matrix."""
    F = np.asarray(F, dtype=np.float64)
    if F.shape != (b1.n, b2.n):
        raise ValueError(f"signal shape {F.shape} does not match bases ({b1.n}, {b2.n})")
    return b1.U.T @ F @ b2.U


def twin_igft(b1: SpectralBasis, b2: SpectralBasis, S) -> np.ndarray:
    """
    F = U₁ F̂ U₂ᵀ.

    The inverse formula is sometimes printed with F̂²; squaring would not
    invert twin_gft, so the plain coefficient matrix is used.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.shape != (b1.size, b2.size):
        raise ValueError(f"spectrum shape {S.shape} does not match bases ({b1.size}, {b2.size})")
    return b1.U @ S @ b2.U.T


def kronecker_eigenpairs(b1: SpectralBasis, b2: SpectralBasis) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigenpairs of L1 ⊕ L2 in lexicographic (k1, k2) order:
    λ = λ⁽¹⁾_{k1} + λ⁽²⁾_{k2}, u = u⁽¹⁾_{k1} ⊗ u⁽²⁾_{k2}.
    """
    values = (b1.eigenvalues[:, None] + b2.eigenvalues[None, :]).ravel()
    return values, np.kron(b1.U, b2.U)


def product_basis(b1: SpectralBasis, b2: SpectralBasis) -> SpectralBasis:
    """Kronecker eigenpairs sorted ascending (stable in lexicographic order)."""
    values, vectors = kronecker_eigenpairs(b1, b2)
    order = np.argsort(values, kind="stable")
    return SpectralBasis.build(values[order], vectors[:, order], max(b1.group_tol, b2.group_tol))


def _evaluate_response(h: SpectralResponse, eigenvalues: np.ndarray) -> np.ndarray:
    response = h(eigenvalues) if callable(h) else h
    response = np.broadcast_to(np.asarray(response, dtype=np.float64), eigenvalues.shape)
    if not np.all(np.isfinite(response)):
        raise ValueError("Spectral response is not finite on every eigenvalue")
    return response


def spectral_filter_apply(basis: SpectralBasis, h: SpectralResponse, x) -> np.ndarray:
    """x' = U h(Λ) Uᵀ x for a node signal or feature matrix."""
    x = np.asarray(x, dtype=np.float64)
    _check_rows(basis, x, "signal")
    response = _evaluate_response(h, basis.eigenvalues)
    coeffs = basis.U.T @ x
    if coeffs.ndim == 1:
        return basis.U @ (response * coeffs)
    return basis.U @ (response[:, None] * coeffs)


def twin_filter_apply(b1: SpectralBasis, b2: SpectralBasis, h: SpectralResponse, F) -> np.ndarray:
    """Separable product-graph filtering: U₁ (h(λ⁽¹⁾ + λ⁽²⁾) ⊙ F̂) U₂ᵀ."""
    grid = b1.eigenvalues[:, None] + b2.eigenvalues[None, :]
    response = _evaluate_response(h, grid)
    return twin_igft(b1, b2, response * twin_gft(b1, b2, F))


def translate(basis: SpectralBasis, g_hat, i: int) -> np.ndarray:
    """Generalized translation T_i g = √n Σ_l u_l u_l(i) ĝ(λ_l)."""
    if not 0 <= i < basis.n:
        raise IndexError(f"node {i} out of range for {basis.n} nodes")
    g_hat = np.asarray(g_hat, dtype=np.float64)
    if g_hat.shape != (basis.size,):
        raise ValueError(f"kernel has shape {g_hat.shape}, expected ({basis.size},)")
    return np.sqrt(basis.n) * (basis.U @ (basis.U[i, :] * g_hat))


def write_spectrum(basis: SpectralBasis, eigenvalues_path: Path, eigenvectors_path: Path) -> None:
    """Dump eigenvalues as `index,eigenvalue` and U as a row-major headered CSV."""
    write_csv(
        eigenvalues_path,
        ("index", "eigenvalue"),
        ((k, format_float(value)) for k, value in enumerate(basis.eigenvalues)),
    )
    write_csv(
        eigenvectors_path,
        tuple(f"u{k}" for k in range(basis.size)),
        ([format_float(x) for x in row] for row in basis.U),
    )


def read_spectrum(eigenvalues_path: Path, eigenvectors_path: Path) -> SpectralBasis:
    _, value_rows = read_csv_rows(eigenvalues_path)
    _, vector_rows = read_csv_rows(eigenvectors_path)
    try:
        values = np.array([float(row[1]) for row in value_rows])
        vectors = np.array([[float(x) for x in row] for row in vector_rows]).reshape(len(vector_rows), len(values))
    except (ValueError, IndexError) as exc:
        raise DataError(f"Malformed spectrum dump: {exc}")
    return SpectralBasis.build(values, vectors, 0.0)
