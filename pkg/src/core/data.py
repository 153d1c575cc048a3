"""
Dataset ingestion, preprocessing, synthetic generation, stratified
splitting and imbalance-ratio resampling.

Labels are integer indices into a lexicographically sorted class
vocabulary. When no edge file accompanies a feature CSV, the sample graph
is a symmetrized k-nearest-neighbour graph under cosine similarity.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.neighbors import kneighbors_graph
from sklearn.preprocessing import MinMaxScaler

from src.core.config import (
    DEFAULT_LABEL_COLUMN,
    KNN_NEIGHBORS,
    SplitSpec,
    SyntheticConfig,
    derive_rng,
)
from src.core.errors import DataError
from src.core.graph_core import Graph, read_edge_csv, write_edge_csv
from src.core.storage import format_float, read_csv_rows, write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Samples as graph nodes: features X (N×D), labels y in [0, C), and the sample graph."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    graph: Graph
    feature_names: tuple[str, ...]

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.labels.shape != (n,):
            raise DataError(f"{self.labels.shape[0]} labels for {n} samples")
        if self.graph.n != n:
            raise DataError(f"graph has {self.graph.n} nodes for {n} samples")
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError(f"{len(self.feature_names)} feature names for {self.features.shape[1]} columns")
        counts = np.bincount(self.labels, minlength=self.num_classes) if n else np.zeros(self.num_classes)
        if len(counts) != self.num_classes or np.any(counts == 0):
            raise DataError(f"every class needs at least one sample, got counts {counts.tolist()}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


def one_hot_encode(value: str, vocabulary: Sequence[str]) -> np.ndarray:
    """Binary vector with a single 1 at the vocabulary index of value."""
    try:
        position = list(vocabulary).index(value)
    except ValueError:
        raise DataError(f"Unknown category {value!r}; vocabulary is {list(vocabulary)}")
    vector = np.zeros(len(vocabulary))
    vector[position] = 1.0
    return vector


def min_max_normalize(column) -> np.ndarray:
    """(x − min) / (max − min); a constant column maps to zeros."""
    values = np.asarray(column, dtype=np.float64)
    if values.size == 0:
        raise DataError("cannot normalize an empty column")
    return normalize_features(values.reshape(-1, 1)).ravel()


def normalize_features(X: np.ndarray) -> np.ndarray:
    """Per-column min-max scaling to [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return X.copy()
    # MinMaxScaler lets NaN through
    if np.any(np.isnan(X)):
        raise DataError("cannot normalize features containing NaN")
    return MinMaxScaler().fit_transform(X)


def knn_graph(X: np.ndarray, k: int = KNN_NEIGHBORS) -> Graph:
    """Unit-weight k-NN graph (cosine), symmetrized by union of neighbourhoods."""
    n = X.shape[0]
    if n < 2 or k < 1:
        return Graph.empty(n)
    adjacency = kneighbors_graph(
        X, n_neighbors=min(k, n - 1), mode="connectivity", metric="cosine", include_self=False
    ).toarray()
    weights = np.maximum(adjacency, adjacency.T)
    np.fill_diagonal(weights, 0.0)
    return Graph.from_weights(weights)


def load_csv(
    features_path: Path,
    label_column: str = DEFAULT_LABEL_COLUMN,
    edges_path: Optional[Path] = None,
    categorical_columns: Sequence[str] = (),
    normalize: bool = True,
    knn_k: int = KNN_NEIGHBORS,
) -> Dataset:
    """
    Read a feature CSV (one row per sample) and its optional edge list.

    Categorical columns are one-hot expanded into `column=value` features
    (values sorted); all other cells must be numeric.
    """
    header, rows = read_csv_rows(features_path)
    if not header:
        raise DataError(f"{features_path}: empty file")
    header = [h.strip() for h in header]
    if label_column not in header:
        raise DataError(f"{features_path}: label column {label_column!r} not found")
    unknown = set(categorical_columns) - set(header)
    if unknown:
        raise DataError(f"{features_path}: categorical columns {sorted(unknown)} not found")

    for line_no, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{features_path}:{line_no}: expected {len(header)} fields, got {len(row)}")

    label_idx = header.index(label_column)
    raw_labels = [row[label_idx].strip() for row in rows]
    class_names = tuple(sorted(set(raw_labels)))
    label_lookup = {name: k for k, name in enumerate(class_names)}
    labels = np.array([label_lookup[v] for v in raw_labels], dtype=np.int64)

    columns: list[np.ndarray] = []
    feature_names: list[str] = []
    for j, name in enumerate(header):
        if j == label_idx:
            continue
        cells = [row[j].strip() for row in rows]
        if name in categorical_columns:
            vocabulary = sorted(set(cells))
            encoded = np.array([one_hot_encode(c, vocabulary) for c in cells]).reshape(len(cells), len(vocabulary))
            columns.extend(encoded.T)
            feature_names.extend(f"{name}={v}" for v in vocabulary)
            continue
        try:
            columns.append(np.array([float(c) for c in cells]))
        except ValueError:
            raise DataError(f"{features_path}: non-numeric value in feature column {name!r}")
        feature_names.append(name)

    X = np.column_stack(columns) if columns else np.zeros((len(rows), 0))
    if not np.all(np.isfinite(X)):
        raise DataError(f"{features_path}: non-finite feature values")
    if normalize:
        X = normalize_features(X)

    graph = read_edge_csv(edges_path, len(rows)) if edges_path is not None else knn_graph(X, knn_k)
    logger.info(
        f"Loaded {len(rows)} samples, {X.shape[1]} features, {len(class_names)} classes, "
        f"{graph.edge_count()} edges from {features_path}"
    )
    return Dataset(
        features=X,
        labels=labels,
        class_names=class_names,
        graph=graph,
        feature_names=tuple(feature_names),
    )


def write_dataset(ds: Dataset, features_path: Path, edges_path: Path, label_column: str = DEFAULT_LABEL_COLUMN) -> None:
    header = [*ds.feature_names, label_column]
    rows = (
        [*(format_float(v) for v in ds.features[i]), ds.class_names[int(ds.labels[i])]]
        for i in range(ds.n)
    )
    write_csv(features_path, header, rows)
    write_edge_csv(ds.graph, edges_path)


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    """
    Stochastic block model with one community per class.

    Class 0 is the normal class. Features are a class mean (separation ·
    random unit direction) plus isotropic Gaussian noise, then min-max
    normalized; node order is a seeded shuffle.
    """
    config.validate()
    counts = config.resolved_counts()
    if any(c <= 0 for c in counts):
        raise DataError(f"synthetic class counts must be positive, got {list(counts)}")
    rng = derive_rng(config.seed, "synthetic")
    C, D = config.num_classes, config.feature_dim

    labels = np.repeat(np.arange(C), counts)
    labels = labels[rng.permutation(len(labels))]
    n = len(labels)

    directions = rng.standard_normal((C, D))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = config.separation * directions
    X = means[labels] + config.noise * rng.standard_normal((n, D))

    same_class = labels[:, None] == labels[None, :]
    probabilities = np.where(same_class, config.p_in, config.p_out)
    draws = rng.random((n, n))
    upper = np.triu(draws < probabilities, k=1)
    weights = (upper | upper.T).astype(np.float64)

    class_names = tuple(f"class_{k:02d}" for k in range(C))
    graph = Graph.from_weights(weights)
    logger.info(f"Generated synthetic dataset: {n} samples, {C} classes, {graph.edge_count()} edges")
    return Dataset(
        features=normalize_features(X),
        labels=labels,
        class_names=class_names,
        graph=graph,
        feature_names=tuple(f"f{j:03d}" for j in range(D)),
    )


def imbalance_ratio(labels) -> float:
    """Minority-total / majority-count, the majority being the largest class."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64))
    counts = counts[counts > 0]
    if counts.size == 0:
        raise DataError("imbalance ratio of an empty label set")
    majority = counts.max()
    return float((counts.sum() - majority) / majority)


def _allocate(total: int, sizes: np.ndarray) -> np.ndarray:
    """Integer proportional allocation with largest remainders (ties to lower index)."""
    exact = total * sizes / sizes.sum()
    base = np.floor(exact).astype(np.int64)
    remainder = total - int(base.sum())
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:remainder]] += 1
    return base


def resample_imbalance(ds: Dataset, r: float, seed: int) -> Dataset:
    """
    Down/up-sample the minority classes so minority-total / majority-count ≈ r.

    The majority class is untouched. Down-sampling draws without
    replacement; up-sampling keeps every node and appends duplicates, which
    inherit their original's edges. Edges among retained nodes are kept.
    """
    if not 0.0 < r <= 1.0:
        raise DataError(f"imbalance ratio must lie in (0, 1], got {r}")
    counts = ds.class_counts()
    majority = int(np.argmax(counts))
    minority = [c for c in range(ds.num_classes) if c != majority]
    if not minority:
        raise DataError("resampling needs at least one minority class")

    target_total = int(round(r * counts[majority]))
    targets = _allocate(target_total, counts[minority].astype(np.float64))
    if np.any(targets == 0):
        empty = [ds.class_names[minority[i]] for i in np.flatnonzero(targets == 0)]
        raise DataError(f"ratio {r} leaves classes {empty} without samples")

    rng = derive_rng(seed, "resample")
    kept: list[int] = list(np.flatnonzero(ds.labels == majority))
    duplicates: list[int] = []
    for c, target in zip(minority, targets):
        members = np.flatnonzero(ds.labels == c)
        if target <= len(members):
            kept.extend(np.sort(rng.choice(members, size=int(target), replace=False)))
        else:
            kept.extend(members)
            extra = int(target) - len(members)
            duplicates.extend(rng.choice(members, size=extra, replace=extra > len(members)))

    order = np.array(sorted(int(i) for i in kept) + [int(i) for i in duplicates], dtype=np.int64)
    logger.debug(f"Resampled to ratio {r}: {len(order)} samples ({len(duplicates)} duplicates)")
    return Dataset(
        features=ds.features[order],
        labels=ds.labels[order],
        class_names=ds.class_names,
        graph=ds.graph.induced_subgraph(order),
        feature_names=ds.feature_names,
    )


def stratified_split(ds: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-class train share floor(fraction · n_c + 0.5), clamped to [1, n_c − 1];
    which members go to train is decided by a seeded shuffle.
    """
    spec.validate()
    rng = derive_rng(spec.seed, "split")
    train: list[int] = []
    test: list[int] = []
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c)
        if len(members) < 2:
            raise DataError(f"class {ds.class_names[c]!r} has {len(members)} sample(s); stratified split needs 2")
        n_train = int(np.floor(spec.train_fraction * len(members) + 0.5))
        n_train = min(max(n_train, 1), len(members) - 1)
        shuffled = members[rng.permutation(len(members))]
        train.extend(shuffled[:n_train])
        test.extend(shuffled[n_train:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))
