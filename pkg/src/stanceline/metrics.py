"""Classification metrics: pairwise AUC, ROC curves, zero-FPR thresholds, eval reports.

AUC follows the pairwise-probability definition: the probability that a random
positive outscores a random negative, counting ties as half. The ROC builder
and the pairwise computation agree to within 1e-9 by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

ScorePair = tuple[float, bool]  # (score, is_positive)


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value for the given inputs."""


def _split_scores(scores: Sequence[ScorePair]) -> tuple[list[float], list[float]]:
    pos = [float(s) for s, label in scores if label]
    neg = [float(s) for s, label in scores if not label]
    return pos, neg


def _pair_statistic(scores: Sequence[ScorePair]) -> tuple[int, int]:
    """Return (V, M): V = 2*wins + ties over all positive-negative pairs, M = n_pos*n_neg."""
    pos, neg = _split_scores(scores)
    if not pos or not neg:
        raise UndefinedMetricError("AUC needs at least one positive and one negative")
    ordered = sorted((s, label) for s, label in scores)
    wins = 0  # positive strictly above negative
    ties = 0
    neg_below = 0
    i = 0
    n = len(ordered)
    while i < n:
        j = i
        group_pos = 0
        group_neg = 0
        while j < n and ordered[j][0] == ordered[i][0]:
            group_pos += ordered[j][1]
            group_neg += not ordered[j][1]
            j += 1
        wins += group_pos * neg_below
        ties += group_pos * group_neg
        neg_below += group_neg
        i = j
    return 2 * wins + ties, len(pos) * len(neg)


def auc(scores: Sequence[ScorePair]) -> float:
    """Pairwise AUC: P(score_pos > score_neg) + 0.5 * P(score_pos = score_neg).

    Flipping all labels must give exactly 1 - auc in float arithmetic, so both
    orientations are derived from one anchor in [0.5, 1], where 1 - x is exact;
    the anchor is within one ulp of the true ratio.
    """
    v, m = _pair_statistic(scores)
    low = min(v, 2 * m - v)
    high = 1.0 - low / (2 * m)
    if v > m:
        return high
    return 1.0 - high


def roc_points(scores: Sequence[ScorePair]) -> list[tuple[float, float, float]]:
    """ROC as (fpr, tpr, threshold) triples, one per distinct score plus the (0,0) origin.

    A point's rates count items with score >= threshold; the origin carries a
    +inf threshold. The trapezoidal area under these points equals auc().
    """
    pos, neg = _split_scores(scores)
    if not pos or not neg:
        raise UndefinedMetricError("ROC needs at least one positive and one negative")
    n_pos, n_neg = len(pos), len(neg)
    points = [(0.0, 0.0, math.inf)]
    pos_ge = 0
    neg_ge = 0
    ordered = sorted((s, label) for s, label in scores)
    i = len(ordered) - 1
    while i >= 0:
        j = i
        threshold = ordered[i][0]
        while j >= 0 and ordered[j][0] == threshold:
            pos_ge += ordered[j][1]
            neg_ge += not ordered[j][1]
            j -= 1
        points.append((neg_ge / n_neg, pos_ge / n_pos, threshold))
        i = j
    return points


def trapezoid_area(points: Sequence[tuple[float, float, float]]) -> float:
    area = 0.0
    for (f1, t1, _), (f2, t2, _) in zip(points, points[1:]):
        area += (f2 - f1) * (t1 + t2) / 2.0
    return area


def threshold_at_zero_fpr(scores: Sequence[ScorePair]) -> tuple[float, float]:
    """Smallest threshold with empirical FPR 0: (threshold, tpr).

    The threshold is the lowest positive score strictly above every negative
    score; when no positive clears the negatives the +inf sentinel is returned
    with tpr 0. Classifying "positive iff score >= threshold" then has FPR 0
    on the input set.
    """
    pos, neg = _split_scores(scores)
    if not neg:
        raise UndefinedMetricError("zero-FPR threshold needs at least one negative")
    if not pos:
        raise UndefinedMetricError("zero-FPR threshold needs at least one positive")
    max_neg = max(neg)
    above = [s for s in pos if s > max_neg]
    if not above:
        return math.inf, 0.0
    threshold = min(above)
    tpr = sum(1 for s in pos if s >= threshold) / len(pos)
    return threshold, tpr


@dataclass
class EvalReport:
    """Test-set metrics for one classifier."""

    classes: tuple[str, ...]
    accuracy: float
    macro_accuracy: float
    per_class_auc: dict[str, float | None]
    confusion: list[list[int]]
    roc: dict[str, list[tuple[float, float, float]] | None]
    n_test: int

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "accuracy": self.accuracy,
            "macro_accuracy": self.macro_accuracy,
            "per_class_auc": {
                label: ("insufficient-support" if value is None else value)
                for label, value in self.per_class_auc.items()
            },
            "confusion": self.confusion,
            "roc": {
                label: (None if pts is None else [list(p) for p in pts])
                for label, pts in self.roc.items()
            },
            "n_test": self.n_test,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvalReport":
        return cls(
            classes=tuple(data["classes"]),
            accuracy=float(data["accuracy"]),
            macro_accuracy=float(data["macro_accuracy"]),
            per_class_auc={
                label: (None if value == "insufficient-support" else float(value))
                for label, value in data["per_class_auc"].items()
            },
            confusion=[[int(c) for c in row] for row in data["confusion"]],
            roc={
                label: (None if pts is None else [tuple(float(x) for x in p) for p in pts])
                for label, pts in data["roc"].items()
            },
            n_test=int(data["n_test"]),
        )


def confusion_matrix(
    y_true: Sequence[str], y_pred: Sequence[str], classes: Sequence[str]
) -> np.ndarray:
    index = {label: i for i, label in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=int)
    for truth, pred in zip(y_true, y_pred):
        matrix[index[truth], index[pred]] += 1
    return matrix


def compute_report(
    probs: np.ndarray, y_true: Sequence[str], classes: Sequence[str]
) -> EvalReport:
    """Build an EvalReport from per-class probabilities and true labels.

    Accuracy is argmax accuracy; macro accuracy averages per-class one-vs-rest
    binary accuracy. Per-class AUC is one-vs-rest, reported as None
    ("insufficient support") when a class has fewer than 2 test examples or no
    negatives.
    """
    if len(y_true) == 0:
        raise ValueError("test set must be nonempty")
    unknown = sorted(set(y_true) - set(classes))
    if unknown:
        raise ValueError(f"test labels outside model classes: {unknown}")
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (len(y_true), len(classes)):
        raise ValueError(f"probability matrix shape {probs.shape} does not match test set")
    n = len(y_true)
    preds = [classes[i] for i in np.argmax(probs, axis=1)]
    matrix = confusion_matrix(y_true, preds, classes)
    accuracy = float(np.trace(matrix)) / n
    row_sums = matrix.sum(axis=1)
    col_sums = matrix.sum(axis=0)
    per_class_acc = [
        (n - row_sums[i] - col_sums[i] + 2 * matrix[i, i]) / n for i in range(len(classes))
    ]
    macro_accuracy = float(np.mean(per_class_acc))
    per_class_auc: dict[str, float | None] = {}
    roc: dict[str, list[tuple[float, float, float]] | None] = {}
    for i, label in enumerate(classes):
        support = int(row_sums[i])
        if support < 2 or support > n - 1:
            per_class_auc[label] = None
            roc[label] = None
            continue
        pairs = [(float(probs[k, i]), y_true[k] == label) for k in range(n)]
        per_class_auc[label] = auc(pairs)
        roc[label] = roc_points(pairs)
    return EvalReport(
        classes=tuple(classes),
        accuracy=accuracy,
        macro_accuracy=macro_accuracy,
        per_class_auc=per_class_auc,
        confusion=matrix.tolist(),
        roc=roc,
        n_test=n,
    )


def accuracy_score(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    if len(y_true) != len(y_pred) or not y_true:
        raise ValueError("need equal-length nonempty label sequences")
    return sum(t == p for t, p in zip(y_true, y_pred)) / len(y_true)
