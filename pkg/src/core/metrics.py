"""
Confusion-matrix metrics for multiclass failure classification.

Conventions: any ratio with a zero denominator is 0. Classes without true
samples are left out of the recall-based summaries (cmA, g-mean) with a
warning, since their recall is undefined.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix, matthews_corrcoef, precision_recall_fscore_support

from src.core.storage import format_float, write_csv, write_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[k, l] = number of samples with true class k predicted as l."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion counts must be square, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("confusion counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1).astype(np.float64)

    @property
    def labels(self) -> list[int]:
        return list(range(self.num_classes))

    def label_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(y_true, y_pred) vectors that reproduce these counts."""
        true_idx, pred_idx = np.indices(self.counts.shape)
        repeats = np.asarray(self.counts, dtype=np.int64).ravel()
        return np.repeat(true_idx.ravel(), repeats), np.repeat(pred_idx.ravel(), repeats)


@dataclass(frozen=True)
class ClassificationScores:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float


def confusion(y_true, y_pred, num_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"y_true has shape {y_true.shape}, y_pred has {y_pred.shape}")
    # confusion_matrix silently drops labels outside `labels`
    for name, values in (("y_true", y_true), ("y_pred", y_pred)):
        if values.size and (values.min() < 0 or values.max() >= num_classes):
            raise ValueError(f"{name} contains labels outside [0, {num_classes})")
    if y_true.size == 0:
        return ConfusionMatrix(counts=np.zeros((num_classes, num_classes), dtype=np.int64))
    counts = confusion_matrix(y_true, y_pred, labels=list(range(num_classes)))
    return ConfusionMatrix(counts=counts.astype(np.int64))


def precision_recall_f1(cm: ConfusionMatrix) -> ClassificationScores:
    C = cm.num_classes
    if cm.total == 0:
        zeros = np.zeros(C)
        return ClassificationScores(zeros, zeros, zeros, zeros, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    y_true, y_pred = cm.label_pairs()
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=cm.labels, average=None, zero_division=0
    )
    support = support.astype(np.float64)

    def weighted(values: np.ndarray) -> float:
        return float(np.average(values, weights=support))

    return ClassificationScores(
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=weighted(precision),
        weighted_recall=weighted(recall),
        weighted_f1=weighted(f1),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts) / cm.total) if cm.total else 0.0


def _supported_recalls(cm: ConfusionMatrix, metric: str) -> np.ndarray:
    scores = precision_recall_f1(cm)
    present = scores.support > 0
    if not np.all(present):
        missing = [int(k) for k in np.flatnonzero(~present)]
        logger.warning(f"{metric}: classes {missing} have no true samples and are excluded")
    return scores.recall[present]


def g_mean(cm: ConfusionMatrix) -> float:
    """(∏_k recall_k)^(1/K) over the K classes with support; √(TPR·TNR) in the binary case."""
    recalls = _supported_recalls(cm, "g_mean")
    if recalls.size == 0 or np.any(recalls == 0):
        return 0.0
    return float(np.exp(np.log(recalls).mean()))


def mcc_multiclass(cm: ConfusionMatrix) -> float:
    """
    Multiclass Matthews correlation (R_K statistic):

        (c·s − Σ p_k t_k) / √((s² − Σ p_k²)(s² − Σ t_k²))

    c = trace, s = total, t = row sums, p = column sums. 0 when the denominator is 0.
    """
    if cm.total == 0:
        return 0.0
    value = float(matthews_corrcoef(*cm.label_pairs()))
    return 0.0 if np.isnan(value) else value


def cma(cm: ConfusionMatrix) -> float:
    """Classification mean accuracy: mean per-class recall over classes with support."""
    recalls = _supported_recalls(cm, "cma")
    return float(recalls.mean()) if recalls.size else 0.0


@dataclass(frozen=True)
class MetricsReport:
    class_names: tuple[str, ...]
    scores: ClassificationScores
    accuracy: float
    g_mean: float
    mcc: float
    cma: float

    def to_json(self) -> dict:
        """Fixed key set of the report file."""
        return {
            "accuracy": self.accuracy,
            "per_class": [
                {
                    "name": name,
                    "precision": float(self.scores.precision[k]),
                    "recall": float(self.scores.recall[k]),
                    "f1": float(self.scores.f1[k]),
                    "support": int(self.scores.support[k]),
                }
                for k, name in enumerate(self.class_names)
            ],
            "macro_f1": self.scores.macro_f1,
            "weighted_f1": self.scores.weighted_f1,
            "g_mean": self.g_mean,
            "mcc": self.mcc,
            "cma": self.cma,
        }

    def summary(self) -> dict[str, float]:
        """Flat headline numbers, including the macro/weighted precision and recall."""
        return {
            "accuracy": self.accuracy,
            "cma": self.cma,
            "g_mean": self.g_mean,
            "mcc": self.mcc,
            "macro_f1": self.scores.macro_f1,
            "macro_precision": self.scores.macro_precision,
            "macro_recall": self.scores.macro_recall,
            "weighted_f1": self.scores.weighted_f1,
            "weighted_precision": self.scores.weighted_precision,
            "weighted_recall": self.scores.weighted_recall,
        }


def build_report(cm: ConfusionMatrix, class_names: Optional[Sequence[str]] = None) -> MetricsReport:
    names = tuple(class_names) if class_names is not None else tuple(str(k) for k in range(cm.num_classes))
    if len(names) != cm.num_classes:
        raise ValueError(f"{len(names)} class names for {cm.num_classes} classes")
    return MetricsReport(
        class_names=names,
        scores=precision_recall_f1(cm),
        accuracy=accuracy(cm),
        g_mean=g_mean(cm),
        mcc=mcc_multiclass(cm),
        cma=cma(cm),
    )


def write_report(report: MetricsReport, path: Path) -> None:
    write_json(path, report.to_json())


def write_confusion_csv(cm: ConfusionMatrix, class_names: Sequence[str], path: Path) -> None:
    """Confusion matrix with class names as header row and first column (rows = true class)."""
    header = ["true\\pred", *class_names]
    rows = ([name, *(int(v) for v in cm.counts[k])] for k, name in enumerate(class_names))
    write_csv(path, header, rows)


def write_scores_csv(probs: np.ndarray, y_true, y_pred, class_names: Sequence[str], index, path: Path) -> None:
    """Per-node probabilities for external ROC plotting."""
    header = ["node", "true", "predicted", *(f"p_{name}" for name in class_names)]
    rows = (
        [int(i), class_names[int(y_true[i])], class_names[int(y_pred[i])],
         *(format_float(p) for p in probs[i])]
        for i in index
    )
    write_csv(path, header, rows)
