"""Deployment-facing evaluation: confusion matrices, per-class
precision/recall/F1, rank-based ROC-AUC, Brier score, sigmoid (Platt)
calibration, and 10-bin reliability curves.

ROC-AUC is the Mann-Whitney pair statistic (wins 1, ties 0.5) computed via
midranks, which agrees exactly with all-pairs enumeration. Platt scaling is
a plain two-parameter MLE on the logit of the clamped score, initialized at
the identity (a, b) = (1, 0) with monotone-descent Newton steps, so the
fitted log-loss never exceeds the uncalibrated log-loss on the fitting set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

CLAMP_EPSILON = 1e-6


def _check_probs_labels(probs, labels) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if probs.shape != labels.shape:
        raise DataError(f"length mismatch: {probs.shape} probs vs {labels.shape} labels")
    if probs.size == 0:
        raise DataError("need at least one example")
    if np.any((probs < 0) | (probs > 1)):
        raise DataError("probabilities must lie in [0, 1]")
    if np.any((labels != 0) & (labels != 1)):
        raise DataError("labels must be binary")
    return probs, labels


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int
    threshold: float = 0.5

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    def to_dict(self) -> dict:
        return {"tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp,
                "threshold": self.threshold}


def confusion_at_threshold(probs, labels, threshold: float = 0.5) -> ConfusionMatrix:
    """Tally predictions with the >= threshold decision rule."""
    probs, labels = _check_probs_labels(probs, labels)
    pred = probs >= threshold
    pos = labels == 1
    return ConfusionMatrix(
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        tp=int(np.sum(pred & pos)),
        threshold=threshold,
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def precision_recall_f1(cm: ConfusionMatrix, positive_class: int = 1) -> ClassMetrics:
    """Standard definitions; a zero denominator yields 0 with a degenerate flag."""
    if positive_class == 1:
        tp, fp, fn = cm.tp, cm.fp, cm.fn
    else:
        tp, fp, fn = cm.tn, cm.fn, cm.fp
    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision=precision, recall=recall, f1=f1, degenerate=degenerate)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC via midranks; ties count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape:
        raise DataError("length mismatch between scores and labels")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC-AUC requires both classes present")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0  # 1-based average rank of the tie block
        ranks[order[i : j + 1]] = midrank
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[labels == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def brier(probs, labels) -> float:
    """Mean squared difference between probability and outcome."""
    probs, labels = _check_probs_labels(probs, labels)
    return float(np.mean((probs - labels) ** 2))


def log_loss(probs, labels, eps: float = CLAMP_EPSILON) -> float:
    probs, labels = _check_probs_labels(probs, labels)
    clamped = np.clip(probs, eps, 1 - eps)
    return float(-np.mean(labels * np.log(clamped) + (1 - labels) * np.log(1 - clamped)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class PlattModel:
    """Two-parameter sigmoid recalibration in logit-of-score space."""

    a: float
    b: float
    clamp_epsilon: float = CLAMP_EPSILON
    initial_log_loss: float = field(default=float("nan"))
    final_log_loss: float = field(default=float("nan"))
    n_iters: int = 0

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "clamp_epsilon": self.clamp_epsilon,
            "initial_log_loss": self.initial_log_loss,
            "final_log_loss": self.final_log_loss,
            "n_iters": self.n_iters,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PlattModel":
        return cls(
            a=float(raw["a"]),
            b=float(raw["b"]),
            clamp_epsilon=float(raw.get("clamp_epsilon", CLAMP_EPSILON)),
            initial_log_loss=float(raw.get("initial_log_loss", float("nan"))),
            final_log_loss=float(raw.get("final_log_loss", float("nan"))),
            n_iters=int(raw.get("n_iters", 0)),
        )


def _logit_scores(scores: np.ndarray, eps: float) -> np.ndarray:
    clamped = np.clip(scores, eps, 1 - eps)
    return np.log(clamped / (1 - clamped))


def _platt_nll(a: float, b: float, s: np.ndarray, y: np.ndarray) -> float:
    z = a * s + b
    # log(1 + exp(-|z|)) + max(z, 0) - y*z is the stable Bernoulli NLL
    return float(np.mean(np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - y * z))


def fit_platt(scores, labels, max_iters: int = 100, tol: float = 1e-10) -> PlattModel:
    """Fit sigmoid(a * logit(score) + b) by damped Newton descent.

    Initialization at (1, 0) plus a monotone line search guarantees the
    fitted log-loss never exceeds the identity log-loss on the fitting set.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape or scores.size == 0:
        raise DataError("scores and labels must be equal-length and non-empty")
    if np.any((labels != 0) & (labels != 1)):
        raise DataError("labels must be binary")
    if np.all(labels == labels[0]):
        raise DataError("Platt calibration requires both classes present")
    s = _logit_scores(scores, CLAMP_EPSILON)
    a, b = 1.0, 0.0
    initial = _platt_nll(a, b, s, labels)
    loss = initial
    iters = 0
    for _ in range(max_iters):
        iters += 1
        p = _sigmoid(a * s + b)
        residual = p - labels
        grad = np.array([float(np.mean(residual * s)), float(np.mean(residual))])
        if np.max(np.abs(grad)) <= tol:
            break
        w = p * (1 - p)
        hess = np.array([
            [float(np.mean(w * s * s)), float(np.mean(w * s))],
            [float(np.mean(w * s)), float(np.mean(w))],
        ])
        try:
            step = np.linalg.solve(hess, grad)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = grad
        # backtrack until the loss actually decreases
        t = 1.0
        improved = False
        for _ in range(60):
            cand_a, cand_b = a - t * step[0], b - t * step[1]
            cand_loss = _platt_nll(cand_a, cand_b, s, labels)
            if cand_loss < loss:
                a, b, loss = cand_a, cand_b, cand_loss
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    model = PlattModel(a=a, b=b, initial_log_loss=initial, final_log_loss=loss, n_iters=iters)
    if a < 0:
        import warnings

        warnings.warn("Platt slope is negative: score ordering is reversed", stacklevel=2)
    return model


def apply_platt(model: PlattModel, scores) -> np.ndarray | float:
    """sigmoid(a * logit(clamp(score)) + b); monotone in score when a > 0."""
    arr = np.asarray(scores, dtype=float)
    s = _logit_scores(arr, model.clamp_epsilon)
    out = _sigmoid(model.a * s + model.b)
    if np.ndim(scores) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ReliabilityBin:
    low: float
    high: float
    count: int
    mean_pred: float | None
    event_rate: float | None


@dataclass(frozen=True)
class ReliabilityCurve:
    bins: tuple[ReliabilityBin, ...]
    n: int

    def to_rows(self) -> list[list]:
        rows = []
        for b in self.bins:
            rows.append([
                b.low, b.high, b.count,
                "" if b.mean_pred is None else b.mean_pred,
                "" if b.event_rate is None else b.event_rate,
            ])
        return rows


def reliability_curve(probs, labels, n_bins: int = 10) -> ReliabilityCurve:
    """Equal-width bins over [0, 1); the last bin is right-closed. Empty
    bins are reported with count 0 and no mean/rate."""
    probs, labels = _check_probs_labels(probs, labels)
    idx = np.minimum((probs * n_bins).astype(int), n_bins - 1)
    bins = []
    for i in range(n_bins):
        member = idx == i
        count = int(np.sum(member))
        if count == 0:
            bins.append(ReliabilityBin(i / n_bins, (i + 1) / n_bins, 0, None, None))
        else:
            bins.append(ReliabilityBin(
                i / n_bins, (i + 1) / n_bins, count,
                float(np.mean(probs[member])),
                float(np.mean(labels[member])),
            ))
    return ReliabilityCurve(bins=tuple(bins), n=len(probs))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    class0: ClassMetrics
    class1: ClassMetrics
    roc_auc: float
    brier: float
    confusion: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "p0": self.class0.precision,
            "r0": self.class0.recall,
            "f1_0": self.class0.f1,
            "p1": self.class1.precision,
            "r1": self.class1.recall,
            "f1_1": self.class1.f1,
            "roc_auc": self.roc_auc,
            "brier": self.brier,
            "confusion": self.confusion.to_dict(),
            "degenerate_class0": self.class0.degenerate,
            "degenerate_class1": self.class1.degenerate,
        }

    def table_row(self, name: str) -> list:
        return [name, self.accuracy,
                self.class0.precision, self.class0.recall, self.class0.f1,
                self.class1.precision, self.class1.recall, self.class1.f1,
                self.roc_auc, self.brier]


METRICS_TABLE_HEADER = ["model", "acc", "p0", "r0", "f1_0", "p1", "r1", "f1_1", "roc_auc", "brier"]


def compute_metrics(probs, labels, threshold: float = 0.5) -> MetricsReport:
    cm = confusion_at_threshold(probs, labels, threshold)
    return MetricsReport(
        accuracy=cm.accuracy,
        class0=precision_recall_f1(cm, positive_class=0),
        class1=precision_recall_f1(cm, positive_class=1),
        roc_auc=roc_auc(probs, labels),
        brier=brier(probs, labels),
        confusion=cm,
    )
