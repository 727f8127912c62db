"""Brute-force Euclidean k-nearest-neighbour classification.

Neighbours are ordered by (distance, training index). The score of a query
is the fraction of its k neighbours that are positive; the class call is
positive only when strictly more than half are (vote ties go negative).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KnnModel", "knn_fit", "knn_predict", "knn_scores", "knn_select_k", "knn_train_scores"]


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray  # 1 = positive (Malignant), 0 = negative
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.X.shape[0]:
            raise ValueError(f"k must lie in [1, {self.X.shape[0]}], got {self.k}")


def knn_fit(X, y01, k):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y01).astype(np.int8).reshape(-1)
    if X.shape[0] != y.size:
        raise ValueError("X and y lengths differ")
    return KnnModel(X, y, int(k))


def _sq_dists(A, B):
    # exact per-pair sums of squared differences; avoids the |a|^2+|b|^2-2ab cancellation
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def knn_scores(model, Q, exclude_self=False):
    """Positive-neighbour fractions for each query row.

    ``exclude_self`` treats query row i as training row i and drops it from
    its own neighbour set.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != model.X.shape[1]:
        raise ValueError(f"dimension mismatch: {Q.shape[1]} vs {model.X.shape[1]}")
    out = np.empty(Q.shape[0])
    # chunk queries to bound the (m, n, p) difference tensor
    step = max(1, 2_000_000 // max(1, model.X.shape[0] * model.X.shape[1]))
    for s in range(0, Q.shape[0], step):
        d2 = _sq_dists(Q[s:s + step], model.X)
        if exclude_self:
            rows = np.arange(d2.shape[0])
            d2[rows, s + rows] = np.inf
        # stable sort keeps the lower training index first among equal distances
        idx = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
        out[s:s + step] = model.y[idx].sum(axis=1) / model.k
    return out


def knn_predict(model, x):
    """``(label, score)`` for one query, or arrays for a matrix of queries."""
    x = np.asarray(x, dtype=float)
    scores = knn_scores(model, x)
    labels = (scores > 0.5).astype(int)
    if x.ndim == 1:
        return int(labels[0]), float(scores[0])
    return labels, scores


def knn_train_scores(model, leave_one_out=False):
    """Scores for the model's own training rows.

    With ``leave_one_out`` each row is excluded from its own neighbour set;
    otherwise it counts as its own nearest neighbour.
    """
    if leave_one_out and model.k >= model.X.shape[0]:
        raise ValueError("leave-one-out needs k < number of training rows")
    return knn_scores(model, model.X, exclude_self=leave_one_out)


def knn_select_k(X, y01, candidate_ks, folds):
    """Candidate with the lowest mean validation error; ties go to the smaller k.

    Returns ``(best_k, {k: mean_error})``.
    """
    ks = sorted(set(int(k) for k in candidate_ks))
    if not ks:
        raise ValueError("candidate_ks is empty")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y01).astype(int)
    errors = {}
    for k in ks:
        fold_err = []
        for tr, va in folds:
            model = knn_fit(X[tr], y[tr], k)
            pred = (knn_scores(model, X[va]) > 0.5).astype(int)
            fold_err.append(float(np.mean(pred != y[va])))
        errors[k] = float(np.mean(fold_err))
    best = min(ks, key=lambda k: (errors[k], k))
    return best, errors
