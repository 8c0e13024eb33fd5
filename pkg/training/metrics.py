from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import (
    confusion_matrix,
    matthews_corrcoef,
    precision_recall_fscore_support,
    roc_auc_score,
)
from sklearn.preprocessing import label_binarize

from utils.formatting import write_csv

log = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    """C×C counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    @classmethod
    def empty(cls, n_classes: int) -> ConfusionMatrix:
        return cls(np.zeros((n_classes, n_classes), dtype=np.int64))

    @classmethod
    def from_predictions(cls, labels, predictions, n_classes: int) -> ConfusionMatrix:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            return cls.empty(n_classes)
        counts = confusion_matrix(labels, np.asarray(predictions, dtype=np.int64), labels=np.arange(n_classes))
        return cls(counts.astype(np.int64))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.counts + other.counts)

    def expand(self) -> tuple[np.ndarray, np.ndarray]:
        """(labels, predictions) vectors reproducing these counts."""
        cells = np.repeat(np.arange(self.counts.size), self.counts.reshape(-1))
        return cells // self.n_classes, cells % self.n_classes


@dataclass
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())


def compute_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """One-vs-rest precision, recall and F1 per class; 0/0 counts as 0."""
    if cm.total == 0:
        zeros = np.zeros(cm.n_classes)
        return ClassMetrics(zeros, zeros.copy(), zeros.copy())
    labels, predictions = cm.expand()
    precision, recall, f1, _ = precision_recall_fscore_support(
        labels, predictions, labels=np.arange(cm.n_classes), average=None, zero_division=0
    )
    return ClassMetrics(precision.astype(np.float64), recall.astype(np.float64), f1.astype(np.float64))


def compute_mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation, scaled by the fraction of classes with true samples.

    A class with no true samples cannot be confirmed, so a diagonal matrix only
    scores 1 when every class is present.
    """
    if cm.total == 0:
        return 0.0
    labels, predictions = cm.expand()
    mcc = float(matthews_corrcoef(labels, predictions))
    present = np.count_nonzero(cm.counts.sum(axis=1))
    return mcc * present / cm.n_classes


def _binary_decisions(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """Flatten to binary (score, is_positive) pairs.

    1-D scores are taken as binary decisions already; an N×C matrix is spread
    one-vs-rest over all N·C (sample, class) pairs.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim == 1:
        return scores, labels.astype(bool)
    onehot = np.zeros(scores.shape, dtype=bool)
    onehot[np.arange(len(labels)), labels] = True
    return scores.reshape(-1), onehot.reshape(-1)


def compute_auc_micro(scores, labels) -> float:
    """Probability a random positive outranks a random negative, ties counted half."""
    flat, positive = _binary_decisions(scores, labels)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined without both positive and negative decisions")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        return float(roc_auc_score(positive, flat))
    indicator = label_binarize(np.asarray(labels, dtype=np.int64), classes=np.arange(scores.shape[1]))
    if indicator.shape[1] == 1:
        indicator = np.hstack([1 - indicator, indicator])
    return float(roc_auc_score(indicator, scores, average="micro"))


def pr_curve(scores, labels) -> np.ndarray:
    """Micro-averaged (threshold, precision, recall) rows.

    The first row is the (inf, 1, 0) endpoint; then one row per distinct score,
    descending, predicting positive when score >= threshold.
    """
    flat, positive = _binary_decisions(scores, labels)
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise ValueError("PR curve is undefined without positive decisions")
    order = np.argsort(-flat, kind="stable")
    sorted_scores = flat[order]
    tp = np.cumsum(positive[order])
    seen = np.arange(1, len(flat) + 1)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[sorted_scores[1:] != sorted_scores[:-1], True])

    rows = np.empty((len(ends) + 1, 3), dtype=np.float64)
    rows[0] = (np.inf, 1.0, 0.0)
    rows[1:, 0] = sorted_scores[ends]
    rows[1:, 1] = tp[ends] / seen[ends]
    rows[1:, 2] = tp[ends] / n_pos
    return rows


def pr_area(curve: np.ndarray) -> float:
    precision, recall = curve[:, 1], curve[:, 2]
    return float(np.sum(np.diff(recall) * (precision[1:] + precision[:-1]) / 2.0))


def export_pr_curve(scores, labels, path) -> np.ndarray:
    curve = pr_curve(scores, labels)
    write_csv(
        path,
        ("threshold", "precision", "recall"),
        ([repr(float(t)) if math.isfinite(t) else "inf", repr(float(p)), repr(float(r))] for t, p, r in curve),
    )
    log.info("PR curve with %d points written to %s", len(curve), path)
    return curve


@dataclass
class MetricsReport:
    confusion: ConfusionMatrix
    per_class: ClassMetrics
    auc_micro: float | None
    mcc: float
    pr_curve: np.ndarray | None

    @property
    def macro_precision(self) -> float:
        return self.per_class.macro_precision

    @property
    def macro_recall(self) -> float:
        return self.per_class.macro_recall

    @property
    def macro_f1(self) -> float:
        return self.per_class.macro_f1

    @property
    def accuracy(self) -> float:
        total = self.confusion.total
        return float(np.trace(self.confusion.counts)) / total if total else 0.0

    def summary(self) -> dict[str, float | None]:
        """The five headline metrics, in table column order."""
        return {
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "f1": self.macro_f1,
            "auc": self.auc_micro,
            "mcc": self.mcc,
        }


def build_report(labels, scores, n_classes: int) -> MetricsReport:
    """Metrics from true labels and an N×C probability matrix."""
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    cm = ConfusionMatrix.from_predictions(labels, np.argmax(scores, axis=1), n_classes)
    try:
        auc = compute_auc_micro(scores, labels)
        curve = pr_curve(scores, labels)
    except ValueError as exc:
        log.warning("ranking metrics skipped: %s", exc)
        auc, curve = None, None
    return MetricsReport(cm, compute_metrics(cm), auc, compute_mcc(cm), curve)
