"""
Graph representation, structural matrices and product-graph constructions.

Graphs are undirected, weighted, simple and stored densely. Product graphs
order their vertices lexicographically, (0, 0), (0, 1), ..., so that the
Laplacian of G1 □ G2 is exactly the Kronecker sum L1 ⊕ L2.
"""

from __future__ import annotations

import logging
import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from src.core.config import SYMMETRY_TOLERANCE, max_product_nodes
from src.core.errors import DataError, GraphError, GraphSizeError
from src.core.storage import format_float, read_csv_rows, write_csv

logger = logging.getLogger(__name__)

EDGE_CSV_HEADER = ("src", "dst", "weight")


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Graph:
    """Undirected weighted simple graph with a dense weight matrix."""

    weights: np.ndarray
    node_ids: tuple[str, ...]

    @classmethod
    def from_weights(
        cls,
        weights,
        node_ids: Optional[Sequence[str]] = None,
        symmetry_tol: float = SYMMETRY_TOLERANCE,
    ) -> "Graph":
        """
        Validate and freeze a weight matrix.

        Small asymmetries (CSV rounding noise) up to symmetry_tol are removed
        by symmetrizing (W + Wᵀ)/2; anything larger is rejected.
        """
        w = np.array(weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise GraphError(f"Weight matrix must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise GraphError("Weight matrix contains non-finite values")
        n = w.shape[0]
        if n and np.max(np.abs(w - w.T)) > symmetry_tol:
            raise GraphError(
                f"Weight matrix is not symmetric (max deviation {np.max(np.abs(w - w.T)):.3e})"
            )
        w = (w + w.T) / 2.0
        if np.any(np.diag(w) != 0.0):
            raise GraphError("Graph contains self-loops (non-zero diagonal)")
        if np.any(w < 0.0):
            raise GraphError("Graph contains negative edge weights")

        if node_ids is None:
            ids = tuple(str(i) for i in range(n))
        else:
            ids = tuple(str(x) for x in node_ids)
            if len(ids) != n:
                raise GraphError(f"{len(ids)} node ids for {n} nodes")
        return cls(weights=_readonly(w), node_ids=ids)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls.from_weights(np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def degrees(self) -> np.ndarray:
        """DegreeVector: d[i] = Σ_j w[i, j]."""
        return self.weights.sum(axis=1)

    def edges(self) -> list[tuple[int, int, float]]:
        """Undirected edges (i < j) in row-major order."""
        rows, cols = np.nonzero(np.triu(self.weights, k=1))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(rows, cols)]

    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights, k=1)))

    def total_weight(self) -> float:
        return float(np.triu(self.weights, k=1).sum())

    def induced_subgraph(self, indices: Sequence[int]) -> "Graph":
        """
        Subgraph on the given node indices, in the given order.

        Repeated indices yield copies that share the original's neighbours
        but are not linked to each other.
        """
        idx = np.asarray(indices, dtype=np.int64)
        sub = self.weights[np.ix_(idx, idx)]
        ids = tuple(str(i) for i in range(len(idx)))
        return Graph.from_weights(sub, node_ids=ids)


def is_symmetric(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.all(np.abs(m - m.T) <= tol))


def _check_size(nodes: int, limit: Optional[int]) -> None:
    limit = max_product_nodes() if limit is None else limit
    if nodes > limit:
        raise GraphSizeError(nodes, limit)


def laplacian(g: Graph) -> np.ndarray:
    """L = D − W; rows sum to zero and L is positive semidefinite."""
    lap = -np.array(g.weights, dtype=np.float64)
    np.fill_diagonal(lap, g.degrees())
    return lap


def kronecker_product(a, b, max_nodes: Optional[int] = None) -> np.ndarray:
    """Standard Kronecker product; block (i, j) equals a[i, j]·b."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    _check_size(max(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]), max_nodes)
    return np.kron(a, b)


def kronecker_sum(a, b, max_nodes: Optional[int] = None) -> np.ndarray:
    """A ⊕ B = A ⊗ Iₙ + Iₘ ⊗ B for symmetric A (m×m) and B (n×n)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    for name, m in (("a", a), ("b", b)):
        if not is_symmetric(m, tol=SYMMETRY_TOLERANCE):
            raise ValueError(f"kronecker_sum operand {name} must be symmetric")
    m_size, n_size = a.shape[0], b.shape[0]
    _check_size(m_size * n_size, max_nodes)
    return np.kron(a, np.eye(n_size)) + np.kron(np.eye(m_size), b)


def cartesian_product(g1: Graph, g2: Graph, max_nodes: Optional[int] = None) -> Graph:
    """
    G1 □ G2 with lexicographic vertex order.

    w((i1, i2), (j1, j2)) = w1(i1, j1)·δ(i2, j2) + δ(i1, j1)·w2(i2, j2)
    """
    _check_size(g1.n * g2.n, max_nodes)
    weights = np.kron(g1.weights, np.eye(g2.n)) + np.kron(np.eye(g1.n), g2.weights)
    ids = [f"({a},{b})" for a in g1.node_ids for b in g2.node_ids]
    return Graph.from_weights(weights, node_ids=ids)


def lex_index(i1: int, i2: int, n2: int, n1: Optional[int] = None) -> int:
    """
    Position of vertex (i1, i2) in the lexicographic product ordering.

    i1 is always checked against 0, and against n1 when the first factor's
    size is given. Non-integer indices raise TypeError.
    """
    i1, i2, n2 = operator.index(i1), operator.index(i2), operator.index(n2)
    if n2 <= 0 or not 0 <= i2 < n2:
        raise IndexError(f"i2={i2} out of range for n2={n2}")
    if i1 < 0:
        raise IndexError(f"i1={i1} is negative")
    if n1 is not None and i1 >= operator.index(n1):
        raise IndexError(f"i1={i1} out of range for n1={n1}")
    return i1 * n2 + i2


def lex_unindex(index: int, n2: int, n1: Optional[int] = None) -> tuple[int, int]:
    """Inverse of lex_index."""
    if n2 <= 0 or index < 0 or (n1 is not None and index >= n1 * n2):
        raise IndexError(f"index={index} out of range")
    return divmod(index, n2)


def read_edge_csv(path: Path, n: int) -> Graph:
    """
    Read an edge list with header `src,dst,weight` over nodes 0..n-1.

    Duplicate undirected edges and self-loops are rejected.
    """
    header, rows = read_csv_rows(path)
    if tuple(h.strip() for h in header) != EDGE_CSV_HEADER:
        raise DataError(f"{path}: expected header {','.join(EDGE_CSV_HEADER)}, got {header}")

    weights = np.zeros((n, n))
    seen: set[tuple[int, int]] = set()
    for line_no, row in enumerate(rows, start=2):
        if len(row) != 3:
            raise DataError(f"{path}:{line_no}: expected 3 fields, got {len(row)}")
        try:
            src, dst, weight = int(row[0]), int(row[1]), float(row[2])
        except ValueError:
            raise DataError(f"{path}:{line_no}: non-numeric edge field in {row}")
        if not (0 <= src < n and 0 <= dst < n):
            raise DataError(f"{path}:{line_no}: node index out of range for {n} nodes")
        if src == dst:
            raise GraphError(f"{path}:{line_no}: self-loop on node {src}")
        key = (min(src, dst), max(src, dst))
        if key in seen:
            raise GraphError(f"{path}:{line_no}: duplicate edge {key}")
        seen.add(key)
        weights[src, dst] = weights[dst, src] = weight

    logger.debug(f"Read {len(seen)} edges over {n} nodes from {path}")
    return Graph.from_weights(weights)


def write_edge_csv(g: Graph, path: Path) -> None:
    write_csv(path, EDGE_CSV_HEADER, ((i, j, format_float(w)) for i, j, w in g.edges()))
