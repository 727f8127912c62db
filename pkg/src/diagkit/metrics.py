"""Confusion counts, ROC curves, AUC and accuracy-vs-cutoff sweeps.

Positive means Malignant throughout. Scores are oriented so that larger
values are more Malignant.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LengthMismatch",
    "EmptyClass",
    "ConfusionMatrix",
    "RocCurve",
    "confusion",
    "error_rate",
    "tpr_fpr",
    "roc_curve",
    "auc_pair_oracle",
    "accuracy_vs_cutoff",
    "DEFAULT_CUTOFFS",
]

DEFAULT_CUTOFFS = tuple(i / 100 for i in range(101))


class LengthMismatch(ValueError):
    pass


class EmptyClass(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def misses(self):
        return self.fp + self.fn

    @property
    def error_rate(self):
        return self.misses / self.n

    @property
    def accuracy(self):
        return 1.0 - self.error_rate


def _as_bool(labels):
    arr = np.asarray(labels)
    if arr.dtype.kind in "US":
        bad = set(np.unique(arr)) - {"M", "B"}
        if bad:
            raise ValueError(f"unknown labels {sorted(bad)}")
        return arr == "M"
    return arr.astype(float) > 0


def confusion(preds, truths):
    """Counts of the four outcomes. Labels may be 'M'/'B', 1/0 or +1/-1."""
    if len(preds) != len(truths):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(truths)} truths")
    p = _as_bool(preds)
    t = _as_bool(truths)
    return ConfusionMatrix(
        tp=int(np.sum(p & t)), fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)), fn=int(np.sum(~p & t)),
    )


def error_rate(preds, truths):
    return confusion(preds, truths).error_rate


def tpr_fpr(cm):
    if cm.tp + cm.fn == 0 or cm.fp + cm.tn == 0:
        raise EmptyClass("TPR/FPR need at least one positive and one negative case")
    return cm.tp / (cm.tp + cm.fn), cm.fp / (cm.fp + cm.tn)


@dataclass(frozen=True)
class RocCurve:
    """ROC points from (0, 0) to (1, 1); ``thresholds[0]`` is +inf."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for f, t, th in self.points:
            w.writerow([repr(th), repr(f), repr(t)])
        return buf.getvalue()


def _split_classes(scores, truths):
    s = np.asarray(scores, dtype=float)
    t = _as_bool(truths)
    if s.shape != t.shape:
        raise LengthMismatch(f"{s.size} scores vs {t.size} truths")
    if not t.any() or t.all():
        raise EmptyClass("both classes must be present")
    return s, t


def roc_curve(scores, truths):
    """Sweep thresholds over distinct scores (descending), one point per tie group.

    The AUC is the trapezoidal area, accumulated in integer counts so that it
    equals the Mann-Whitney statistic with half credit for ties.
    """
    s, t = _split_classes(scores, truths)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    # last index of each distinct-score group
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.r_[0, np.cumsum(t_sorted)[ends]]
    fp = np.r_[0, np.cumsum(~t_sorted)[ends]]
    P, N = int(tp[-1]), int(fp[-1])
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * P * N)
    return RocCurve(
        fpr=fp / N,
        tpr=tp / P,
        thresholds=np.r_[np.inf, s_sorted[ends]],
        auc=auc,
    )


def auc_pair_oracle(scores, truths):
    """AUC by counting (positive, negative) pairs; ties count one half."""
    s, t = _split_classes(scores, truths)
    pos = s[t]
    neg = s[~t]
    greater = 0
    ties = 0
    for v in pos:
        greater += int(np.sum(v > neg))
        ties += int(np.sum(v == neg))
    return (greater + 0.5 * ties) / (pos.size * neg.size)


def accuracy_vs_cutoff(probs, truths, grid=DEFAULT_CUTOFFS):
    """``[(cutoff, accuracy)]`` with the rule: call positive iff prob >= cutoff."""
    grid = list(grid)
    if not grid:
        raise ValueError("cutoff grid is empty")
    p = np.asarray(probs, dtype=float)
    t = _as_bool(truths)
    if p.shape != t.shape:
        raise LengthMismatch(f"{p.size} probabilities vs {t.size} truths")
    return [(float(c), float(np.mean((p >= c) == t))) for c in grid]


def sweep_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cutoff", "accuracy"])
    for c, a in rows:
        w.writerow([repr(c), repr(a)])
    return buf.getvalue()
