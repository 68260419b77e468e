"""Ranking and threshold metrics: ROC and PR curves, areas, confusion
matrices, per-class precision/recall/F1, and F1-optimal threshold search.

The prediction rule at a threshold t is score >= t everywhere. PR area
uses the step-wise (average precision) rule; trapezoidal PR interpolation
is biased, so published PR-AUC values are method-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class RocCurve:
    """Polyline of (fpr, tpr, threshold), thresholds descending.

    Starts at (0, 0) with threshold +inf; tied scores flip together.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


@dataclass(frozen=True)
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    roc_auc: float
    pr_auc: float
    threshold: float
    confusion: ConfusionMatrix
    per_class: dict[int, ClassMetrics]
    weighted_f1: float
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "roc_auc": self.roc_auc,
            "pr_auc": self.pr_auc,
            "threshold": self.threshold,
            "confusion": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "tn": self.confusion.tn,
                "fn": self.confusion.fn,
            },
            "per_class": {
                str(label): {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for label, m in self.per_class.items()
            },
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
        }


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricsError("scores and labels must be 1-D and the same length")
    return scores, labels


def roc_curve(scores, labels) -> RocCurve:
    """ROC polyline with one vertex per unique score, descending."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("both classes must be present for a ROC curve")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(np.float64)

    # collapse tie groups: cumulative counts at the last index of each group
    distinct = np.flatnonzero(np.diff(sorted_scores) != 0)
    last = np.concatenate((distinct, [scores.size - 1]))
    tps = np.cumsum(sorted_pos)[last]
    fps = (last + 1) - tps

    tpr = np.concatenate(([0.0], tps / n_pos))
    fpr = np.concatenate(([0.0], fps / n_neg))
    thresholds = np.concatenate(([np.inf], sorted_scores[last]))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC polyline."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def roc_auc(scores, labels) -> float:
    return auc(roc_curve(scores, labels))


def pr_curve_auc(scores, labels) -> tuple[PrCurve, float]:
    """Precision-recall points at descending unique thresholds; area by the
    step-wise rule sum_i (R_i - R_{i-1}) * P_i (average precision)."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise MetricsError("no positive labels; PR curve undefined")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(np.float64)

    distinct = np.flatnonzero(np.diff(sorted_scores) != 0)
    last = np.concatenate((distinct, [scores.size - 1]))
    tps = np.cumsum(sorted_pos)[last]
    predicted = last + 1.0

    precision = tps / predicted
    recall = tps / n_pos
    thresholds = sorted_scores[last]

    deltas = np.diff(np.concatenate(([0.0], recall)))
    area = float((deltas * precision).sum())
    return PrCurve(recall=recall, precision=precision, thresholds=thresholds), area


def confusion_at_threshold(scores, labels, threshold: float) -> ConfusionMatrix:
    scores, labels = _check_scores_labels(scores, labels)
    predicted = scores >= threshold
    actual = labels == 1
    return ConfusionMatrix(
        tp=int((predicted & actual).sum()),
        fp=int((predicted & ~actual).sum()),
        tn=int((~predicted & ~actual).sum()),
        fn=int((~predicted & actual).sum()),
    )


def _f1_from_confusion(cm: ConfusionMatrix) -> float:
    denom = 2 * cm.tp + cm.fp + cm.fn
    return 2 * cm.tp / denom if denom > 0 else 0.0


def optimal_f1_threshold(scores, labels) -> tuple[float, float]:
    """Maximize positive-class F1 over thresholds at unique observed scores;
    ties resolve to the lowest threshold."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise MetricsError("no positive labels; F1 search undefined")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(np.float64)

    distinct = np.flatnonzero(np.diff(sorted_scores) != 0)
    last = np.concatenate((distinct, [scores.size - 1]))
    tps = np.cumsum(sorted_pos)[last]
    predicted = last + 1.0
    fps = predicted - tps
    fns = n_pos - tps
    f1 = np.where(2 * tps + fps + fns > 0, 2 * tps / (2 * tps + fps + fns), 0.0)

    best = f1.max()
    # thresholds are descending; the last index attaining the max is the lowest
    idx = int(np.flatnonzero(f1 == best)[-1])
    return float(sorted_scores[last][idx]), float(best)


def classification_report(scores, labels, threshold: float) -> EvalReport:
    """Threshold metrics plus both AUCs; 0/0 rates are defined as 0."""
    scores, labels = _check_scores_labels(scores, labels)
    cm = confusion_at_threshold(scores, labels, threshold)

    def safe(num, den):
        return num / den if den > 0 else 0.0

    pos = ClassMetrics(
        precision=safe(cm.tp, cm.tp + cm.fp),
        recall=safe(cm.tp, cm.tp + cm.fn),
        f1=_f1_from_confusion(cm),
        support=cm.tp + cm.fn,
    )
    neg_f1_denom = 2 * cm.tn + cm.fn + cm.fp
    neg = ClassMetrics(
        precision=safe(cm.tn, cm.tn + cm.fn),
        recall=safe(cm.tn, cm.tn + cm.fp),
        f1=2 * cm.tn / neg_f1_denom if neg_f1_denom > 0 else 0.0,
        support=cm.tn + cm.fp,
    )
    n = cm.n
    weighted_f1 = (pos.support * pos.f1 + neg.support * neg.f1) / n if n else 0.0
    _, pr_area = pr_curve_auc(scores, labels)
    return EvalReport(
        roc_auc=roc_auc(scores, labels),
        pr_auc=pr_area,
        threshold=float(threshold),
        confusion=cm,
        per_class={0: neg, 1: pos},
        weighted_f1=float(weighted_f1),
        accuracy=float(safe(cm.tp + cm.tn, n)),
    )


def roc_curve_csv(curve: RocCurve) -> str:
    lines = ["fpr,tpr,threshold"]
    for f, t, thr in zip(curve.fpr, curve.tpr, curve.thresholds):
        lines.append(f"{float(f)!r},{float(t)!r},{float(thr)!r}")
    return "\n".join(lines) + "\n"


def pr_curve_csv(curve: PrCurve) -> str:
    lines = ["recall,precision,threshold"]
    for r, p, thr in zip(curve.recall, curve.precision, curve.thresholds):
        lines.append(f"{float(r)!r},{float(p)!r},{float(thr)!r}")
    return "\n".join(lines) + "\n"
