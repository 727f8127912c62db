"""Soft-margin kernel SVM trained on the dual problem.

The decision function is ``f(x) = sum_i alpha_i y_i k(x_i, x) + bias`` and
the class call is ``sign(f)`` with ``sign(0) = +1``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, cross_gram, gram

try:
    if os.environ.get("DIAGKIT_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from ._smo import smo_solve
    BACKEND = "cython"
except ImportError:
    from ._smo_py import smo_solve
    BACKEND = "python"

__all__ = [
    "BACKEND",
    "SvmConfig",
    "SvmModel",
    "NoConvergence",
    "svm_train",
    "svm_decision",
    "svm_predict",
    "dual_objective",
    "kkt_violations",
]

SCHEMA_VERSION = 1
# rank-deficient kernels (e.g. quadratic on 2-D inputs) can need far more
# than 10 n^2 pair updates on small problems
MIN_ITERS = 100_000


class NoConvergence(RuntimeError):
    """Iteration cap reached with KKT violations; ``model`` is the last iterate."""

    def __init__(self, iterations, model):
        self.iterations = iterations
        self.model = model
        super().__init__(f"SMO did not converge within {iterations} iterations")


@dataclass(frozen=True)
class SvmConfig:
    kernel: KernelSpec
    C: float = 1.0
    tol: float = 1e-3
    max_iters: int | None = None  # None -> max(10 * n**2, MIN_ITERS)

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    support_labels: np.ndarray
    alphas: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    tol: float = 1e-3
    iterations: int = 0
    converged: bool = True
    support_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))

    @property
    def n_support(self):
        return int(self.alphas.size)

    def decision_function(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.n_support == 0:
            if X.shape[1] != self.support_vectors.shape[1]:
                raise ValueError("dimension mismatch")
            return np.full(X.shape[0], self.bias)
        K = cross_gram(self.kernel, X, self.support_vectors)
        return K @ (self.alphas * self.support_labels) + self.bias

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1, -1)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "svm",
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "tol": self.tol,
            "bias": self.bias,
            "alphas": self.alphas.tolist(),
            "support_labels": self.support_labels.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "n_features": int(self.support_vectors.shape[1]),
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "svm" or d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError("not a version-1 SVM model document")
        sv = np.asarray(d["support_vectors"], dtype=float).reshape(-1, int(d["n_features"]))
        return cls(
            support_vectors=sv,
            support_labels=np.asarray(d["support_labels"], dtype=float),
            alphas=np.asarray(d["alphas"], dtype=float),
            bias=float(d["bias"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            C=float(d["C"]),
            tol=float(d["tol"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _bias_from_gradient(alpha, grad, y, C):
    # b = -y_i G_i on free vectors; otherwise the midpoint of the feasible interval
    free = (alpha > 0) & (alpha < C)
    yg = y * grad
    if free.any():
        return float(-np.mean(yg[free]))
    at_upper = alpha >= C
    at_lower = alpha <= 0
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isinf(ub):
        ub = lb
    if np.isinf(lb):
        lb = ub
    return float(-(ub + lb) / 2.0)


def _check_labels(y):
    y = np.asarray(y, dtype=float).ravel()
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("need at least one example of each class")
    return y


def svm_train(X, y, cfg, K=None):
    """Fit the dual with SMO.

    ``K`` may carry a precomputed training Gram matrix (used by grid search to
    avoid recomputing it per ``C``). Raises :class:`NoConvergence` when the
    iteration cap is hit.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_labels(y)
    n = y.size
    if X.shape[0] != n:
        raise ValueError("X and y lengths differ")
    if K is None:
        K = gram(cfg.kernel, X)
    max_iters = cfg.max_iters if cfg.max_iters is not None else max(10 * n * n, MIN_ITERS)
    alpha, grad, iters, converged = smo_solve(K, y, float(cfg.C), float(cfg.tol), int(max_iters))
    bias = _bias_from_gradient(alpha, grad, y, cfg.C)
    sv = np.flatnonzero(alpha > 0)
    model = SvmModel(
        support_vectors=X[sv].copy(),
        support_labels=y[sv].copy(),
        alphas=alpha[sv].copy(),
        bias=bias,
        kernel=cfg.kernel,
        C=float(cfg.C),
        tol=float(cfg.tol),
        iterations=int(iters),
        converged=bool(converged),
        support_index=sv,
    )
    if not converged:
        raise NoConvergence(iters, model)
    return model


def svm_decision(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.size != model.support_vectors.shape[1]:
            raise ValueError(f"dimension mismatch: {x.size} vs {model.support_vectors.shape[1]}")
        return float(model.decision_function(x[None, :])[0])
    return model.decision_function(x)


def svm_predict(model, x):
    f = svm_decision(model, x)
    if np.ndim(f) == 0:
        return 1 if f >= 0.0 else -1
    return np.where(f >= 0.0, 1, -1)


def full_alpha(model, n):
    """Dual vector over all ``n`` training rows (zeros off the support)."""
    a = np.zeros(n)
    a[model.support_index] = model.alphas
    return a


def dual_objective(alpha, y, K):
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def kkt_violations(alpha, y, K, bias, C, tol):
    """Indices violating the soft-margin KKT conditions by more than ``tol``."""
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    margin = y * (K @ (alpha * y) + bias)
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~at_zero & ~at_c
    bad = (at_zero & (margin < 1 - tol)) | (at_c & (margin > 1 + tol)) | (free & (np.abs(margin - 1) > tol))
    return np.flatnonzero(bad)
