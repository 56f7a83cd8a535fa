"""Biometric evaluation: accuracy, confusion counts, ROC/AUC and CMC.

The positive class (label 1) is the attack/"fake" class, so TPR is the
fraction of attacks caught and FPR the fraction of genuine samples flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class EvalReport:
    accuracy: float
    confusion: Confusion
    roc: list[tuple[float, float]] | None
    auc: float | None
    cmc: list[tuple[int, float]] = field(default_factory=list)

    @property
    def error_rate(self) -> float:
        return 1.0 - self.accuracy

    def summary(self) -> dict[str, float]:
        return {"accuracy": self.accuracy,
                "auc": float("nan") if self.auc is None else self.auc,
                "error_rate": self.error_rate}


def _binary_inputs(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise MetricError(f"{s.size} scores but {y.size} labels")
    if s.size == 0:
        raise MetricError("no samples to evaluate")
    if not np.isin(y, (0, 1)).all():
        raise MetricError("labels must be 0 (genuine) or 1 (attack)")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    return s, y.astype(np.int64)


def confusion_counts(scores, labels, threshold: float = 0.5) -> Confusion:
    """Counts with ``score > threshold`` called an attack (ties stay genuine)."""
    s, y = _binary_inputs(scores, labels)
    pred = s > threshold
    return Confusion(tp=int(np.sum(pred & (y == 1))), fp=int(np.sum(pred & (y == 0))),
                     tn=int(np.sum(~pred & (y == 0))), fn=int(np.sum(~pred & (y == 1))))


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """Exact ROC: one point per distinct score plus the (0,0)/(1,1) sentinels.

    A sample is flagged when ``score >= threshold``; thresholds sweep from
    +inf down through every distinct score to -inf.
    """
    s, y = _binary_inputs(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC needs at least one sample of each class")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tps = np.cumsum(y)
    fps = np.cumsum(1 - y)
    last_of_run = np.r_[s[1:] != s[:-1], True]
    tpr = np.r_[0.0, tps[last_of_run] / n_pos]
    fpr = np.r_[0.0, fps[last_of_run] / n_neg]
    return list(zip(fpr.tolist(), tpr.tolist()))


def auc_trapezoid(roc: list[tuple[float, float]]) -> float:
    pts = np.asarray(roc, dtype=np.float64)
    fpr, tpr = pts[:, 0], pts[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(scores, labels) -> float:
    return auc_trapezoid(roc_curve(scores, labels))


def cmc_curve(score_matrix, true_class) -> list[tuple[int, float]]:
    """Identification rate at ranks 1..K.

    Row ``i`` of ``score_matrix`` scores probe ``i`` against every class.
    Equal scores rank the lower class index first.
    """
    scores = np.asarray(score_matrix, dtype=np.float64)
    truth = np.asarray(true_class, dtype=np.int64).ravel()
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise MetricError(f"score matrix must be (probes, classes), got shape {scores.shape}")
    if np.isnan(scores).any():
        raise MetricError("score matrix has missing (NaN) class scores")
    n, k = scores.shape
    if truth.shape != (n,):
        raise MetricError(f"{n} probes but {truth.size} true classes")
    if truth.min() < 0 or truth.max() >= k:
        raise MetricError(f"true classes must lie in [0, {k})")
    true_scores = scores[np.arange(n), truth][:, None]
    cols = np.arange(k)[None, :]
    ahead = (scores > true_scores) | ((scores == true_scores) & (cols < truth[:, None]))
    rank = ahead.sum(axis=1) + 1
    return [(r, float(np.mean(rank <= r))) for r in range(1, k + 1)]


def evaluate(scores, labels, threshold: float = 0.5, score_matrix=None) -> EvalReport:
    """Binary report from attack scores (e.g. P(fake)).

    ROC/AUC are ``None`` when only one class is present; accuracy is always
    computed. ``score_matrix`` (per-class scores) adds a CMC curve.
    """
    s, y = _binary_inputs(scores, labels)
    conf = confusion_counts(s, y, threshold)
    acc = (conf.tp + conf.tn) / conf.total
    roc = auc = None
    if 0 < y.sum() < y.size:
        roc = roc_curve(s, y)
        auc = auc_trapezoid(roc)
    cmc = cmc_curve(score_matrix, y) if score_matrix is not None else []
    return EvalReport(accuracy=acc, confusion=conf, roc=roc, auc=auc, cmc=cmc)
