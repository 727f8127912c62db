"""Maximum-likelihood logistic regression fit by damped Newton-Raphson."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .numerics import NotPositiveDefinite, solve_spd

__all__ = [
    "SingularHessian",
    "LogRegModel",
    "add_bias",
    "sigmoid",
    "nll_grad",
    "logreg_fit",
    "logreg_predict_proba",
]

SCHEMA_VERSION = 1
STEP_TOL = 1e-6


class SingularHessian(np.linalg.LinAlgError):
    pass


def sigmoid(a):
    """Logistic sigmoid; saturates to 0/1 without overflow warnings."""
    out = expit(a)
    return float(out) if np.ndim(out) == 0 else out


def add_bias(X):
    """Feature map ``phi(x) = [1, x]``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def nll_grad(w, phis, ts, ridge=0.0):
    """Penalized negative log-likelihood and its gradient.

    ``-sum[t ln s + (1-t) ln(1-s)] + ridge/2 |w|^2`` with ``s = sigmoid(phi.w)``.
    """
    w = np.asarray(w, dtype=float)
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    ts = np.asarray(ts, dtype=float)
    a = phis @ w
    # ln s = log_expit(a), ln(1-s) = log_expit(-a): stable for large |a|
    value = -float(ts @ log_expit(a) + (1.0 - ts) @ log_expit(-a)) + 0.5 * ridge * float(w @ w)
    grad = phis.T @ (expit(a) - ts) + ridge * w
    return value, grad


@dataclass
class LogRegModel:
    weights: np.ndarray
    ridge: float
    iterations: int
    converged: bool = True

    def predict_proba(self, phis):
        return sigmoid(np.atleast_2d(phis) @ self.weights)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "logreg",
            "weights": self.weights.tolist(),
            "ridge": self.ridge,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "logreg" or d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError("not a version-1 logistic regression document")
        return cls(np.asarray(d["weights"], dtype=float), float(d["ridge"]),
                   int(d["iterations"]), bool(d["converged"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def logreg_fit(phis, ts, ridge=1e-8, tol=1e-8, max_iter=100, max_halvings=20):
    """Newton-Raphson on the penalized NLL with step halving.

    Stops when ``|grad| <= tol * (1 + |value|)`` and the Newton step is
    below ``STEP_TOL * (1 + |w|)``. A step that cannot be made
    non-increasing within ``max_halvings`` halvings ends the fit at the
    current iterate. Raises :class:`SingularHessian` when the Newton system
    has no Cholesky factor.
    """
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    ts = np.asarray(ts, dtype=float)
    if not ((ts == 1).any() and (ts == 0).any()):
        raise ValueError("need at least one example of each class")
    w = np.zeros(phis.shape[1])
    value, grad = nll_grad(w, phis, ts, ridge)
    it = 0
    converged = False
    while True:
        s = expit(phis @ w)
        r = s * (1.0 - s)
        H = (phis * r[:, None]).T @ phis + ridge * np.eye(phis.shape[1])
        try:
            step = solve_spd(H, grad)
        except NotPositiveDefinite:
            raise SingularHessian(f"Newton system singular at iteration {it} (ridge={ridge})") from None
        # a tiny gradient alone is not enough: on separable data it vanishes
        # while the Newton step (and |w|) keeps growing
        if (np.linalg.norm(grad) <= tol * (1.0 + abs(value))
                and np.linalg.norm(step) <= STEP_TOL * (1.0 + np.linalg.norm(w))):
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        t = 1.0
        for _ in range(max_halvings + 1):
            w_new = w - t * step
            v_new, g_new = nll_grad(w_new, phis, ts, ridge)
            if v_new <= value:
                break
            t *= 0.5
        else:
            break  # no descent along the Newton direction: numerically stalled
        w, value, grad = w_new, v_new, g_new
    return LogRegModel(w, float(ridge), it, converged)


def logreg_predict_proba(model, phi):
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != model.weights.size:
        raise ValueError(f"dimension mismatch: {phi.shape[-1]} vs {model.weights.size}")
    return sigmoid(phi @ model.weights)
