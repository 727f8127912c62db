"""Variational Bayesian logistic regression with the quadratic sigmoid bound.

Each likelihood factor is replaced by the bound

    sigma(a) >= sigma(xi) exp{(a - xi)/2 - lambda(xi) (a^2 - xi^2)},
    lambda(xi) = (sigma(xi) - 1/2) / (2 xi),

which is Gaussian in the weights, so q(w) = N(mu_N, S_N) is available in
closed form for fixed per-datum parameters xi. Two priors are supported:

* ``fixed``: w ~ N(m0, S0); EM alternates the Gaussian update with the
  xi update and tracks the log of the bounded marginal likelihood.
* ``hierarchical``: w | alpha ~ N(0, alpha^-1 I), alpha ~ Gamma(a0, b0),
  with factorized q(w) q(alpha); coordinate ascent tracks the ELBO.

Predictions average sigma(w.phi) over Monte Carlo draws from q(w).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit, log_expit

from .numerics import cholesky_retry, digamma, log_gamma, make_rng, sample_mvn

__all__ = [
    "VblrConfig",
    "VblrPosterior",
    "lambda_xi",
    "sigmoid_lower_bound",
    "e_step_fixed",
    "m_step_xi",
    "fixed_bound",
    "fit_fixed",
    "fit_hierarchical",
    "fit",
    "elbo",
    "elbo_terms",
    "predict_proba_mc",
]

SCHEMA_VERSION = 1
XI_FLOOR = 1e-10
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class VblrConfig:
    prior: str = "hierarchical"
    m0: np.ndarray | None = None  # fixed mode; default zeros
    S0: np.ndarray | None = None  # fixed mode; default prior_scale * I
    prior_scale: float = 10.0
    a0: float = 1e-2
    b0: float = 1e-2
    xi_init: float = 1.0
    max_em_iters: int = 200
    elbo_tol: float = 1e-6
    mc_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.prior not in ("fixed", "hierarchical"):
            raise ValueError(f"prior must be 'fixed' or 'hierarchical', got {self.prior!r}")
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("a0 and b0 must be positive")
        if not self.xi_init > 0:
            raise ValueError("xi_init must be positive")

    def fixed_prior(self, P):
        m0 = np.zeros(P) if self.m0 is None else np.asarray(self.m0, dtype=float)
        S0 = self.prior_scale * np.eye(P) if self.S0 is None else np.asarray(self.S0, dtype=float)
        if m0.shape != (P,) or S0.shape != (P, P):
            raise ValueError(f"prior shapes {m0.shape}, {S0.shape} do not match P={P}")
        return m0, S0


@dataclass
class VblrPosterior:
    mode: str
    mu: np.ndarray
    S: np.ndarray
    xi: np.ndarray
    elbo_trace: list
    converged: bool
    a_N: float | None = None
    b_N: float | None = None
    iterations: int = 0
    jitter_events: int = 0
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def expected_alpha(self):
        return None if self.a_N is None else self.a_N / self.b_N

    @property
    def chol(self):
        if self._chol is None:
            self._chol, _ = cholesky_retry(self.S)
        return self._chol

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "vblr",
            "mode": self.mode,
            "mu_N": self.mu.tolist(),
            "S_N": self.S.tolist(),
            "a_N": self.a_N,
            "b_N": self.b_N,
            "xi": self.xi.tolist(),
            "elbo_trace": list(self.elbo_trace),
            "converged": self.converged,
            "iterations": self.iterations,
            "jitter_events": self.jitter_events,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "vblr" or d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError("not a version-1 VBLR posterior document")
        P = len(d["mu_N"])
        return cls(
            mode=d["mode"],
            mu=np.asarray(d["mu_N"], dtype=float),
            S=np.asarray(d["S_N"], dtype=float).reshape(P, P),
            xi=np.asarray(d["xi"], dtype=float),
            elbo_trace=[float(v) for v in d["elbo_trace"]],
            converged=bool(d["converged"]),
            a_N=None if d["a_N"] is None else float(d["a_N"]),
            b_N=None if d["b_N"] is None else float(d["b_N"]),
            iterations=int(d["iterations"]),
            jitter_events=int(d["jitter_events"]),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def lambda_xi(xi):
    """``(sigma(xi) - 1/2) / (2 xi)``, with its series 1/8 - xi^2/96 near 0."""
    xi = np.abs(np.asarray(xi, dtype=float))  # even in xi; evaluate on |xi|
    small = xi <= 1e-4
    safe = np.where(small, 1.0, xi)
    out = np.where(small, 0.125 - xi * xi / 96.0, (expit(safe) - 0.5) / (2.0 * safe))
    return float(out) if out.ndim == 0 else out


def sigmoid_lower_bound(a, xi):
    a = np.asarray(a, dtype=float)
    xi = np.asarray(xi, dtype=float)
    log_b = log_expit(xi) + 0.5 * (a - xi) - lambda_xi(xi) * (a * a - xi * xi)
    out = np.exp(log_b)
    return float(out) if out.ndim == 0 else out


def _prep(phis, ts):
    phis = np.asarray(phis, dtype=float)
    if phis.ndim == 1:
        phis = phis[:, None]
    ts = np.asarray(ts, dtype=float).reshape(-1)
    if phis.shape[0] != ts.size:
        raise ValueError("phis and ts lengths differ")
    if not np.all((ts == 0) | (ts == 1)):
        raise ValueError("targets must be 0 or 1")
    return phis, ts


def _gaussian_from_precision(prec, lin):
    """Moments of N(S lin, S) with S = prec^-1, plus ln|S| and a jitter flag."""
    L, jittered = cholesky_retry(prec)
    Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    S = Linv.T @ Linv
    S = 0.5 * (S + S.T)
    mu = Linv.T @ (Linv @ lin)
    logdet_S = -2.0 * float(np.sum(np.log(np.diag(L))))
    return mu, S, logdet_S, jittered


def _data_precision(phis, xi):
    lam = lambda_xi(xi)
    return 2.0 * (phis * lam[:, None]).T @ phis


def e_step_fixed(phis, ts, m0, S0, xi):
    """Gaussian factor ``(mu_N, S_N)`` for fixed ``xi`` under the N(m0, S0) prior."""
    phis, ts = _prep(phis, ts)
    mu, S, _, _ = _e_step_fixed(phis, ts, m0, S0, np.asarray(xi, dtype=float))
    return mu, S


def _e_step_fixed(phis, ts, m0, S0, xi):
    m0 = np.asarray(m0, dtype=float)
    L0, _ = cholesky_retry(S0)
    L0inv = solve_triangular(L0, np.eye(L0.shape[0]), lower=True)
    S0inv = L0inv.T @ L0inv
    prec = S0inv + _data_precision(phis, xi)
    lin = S0inv @ m0 + phis.T @ (ts - 0.5)
    return _gaussian_from_precision(prec, lin)


def m_step_xi(phis, mu, S):
    """``xi_i = sqrt(phi_i' (S + mu mu') phi_i)``, floored at 1e-10."""
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    quad = np.einsum("ij,jk,ik->i", phis, S, phis) + (phis @ mu) ** 2
    return np.maximum(np.sqrt(np.maximum(quad, 0.0)), XI_FLOOR)


def _xi_constant(xi):
    return float(np.sum(log_expit(xi) - 0.5 * xi + lambda_xi(xi) * xi * xi))


def fixed_bound(phis, ts, m0, S0, xi):
    """Log of the integral of the bounded likelihood times the N(m0, S0) prior.

    Returns ``(value, mu_N, S_N)``.
    """
    phis, ts = _prep(phis, ts)
    xi = np.asarray(xi, dtype=float)
    mu, S, logdet_S, _ = _e_step_fixed(phis, ts, m0, S0, xi)
    return _fixed_bound_value(phis, ts, m0, S0, xi, mu, S, logdet_S), mu, S


def _fixed_bound_value(phis, ts, m0, S0, xi, mu, S, logdet_S):
    m0 = np.asarray(m0, dtype=float)
    L0, _ = cholesky_retry(S0)
    logdet_S0 = 2.0 * float(np.sum(np.log(np.diag(L0))))
    z0 = solve_triangular(L0, m0, lower=True)
    # mu' S^-1 mu through S^-1 mu = S0^-1 m0 + sum (t - 1/2) phi
    lin = solve_triangular(L0.T, z0, lower=False) + phis.T @ (ts - 0.5)
    return (0.5 * logdet_S - 0.5 * logdet_S0 + 0.5 * float(mu @ lin)
            - 0.5 * float(z0 @ z0) + _xi_constant(xi))


def fit_fixed(phis, ts, cfg):
    phis, ts = _prep(phis, ts)
    n, P = phis.shape
    m0, S0 = cfg.fixed_prior(P)
    xi = np.full(n, float(cfg.xi_init))
    trace = []
    jitter = 0
    converged = False
    it = 0
    while True:
        mu, S, logdet_S, jittered = _e_step_fixed(phis, ts, m0, S0, xi)
        jitter += jittered
        trace.append(_fixed_bound_value(phis, ts, m0, S0, xi, mu, S, logdet_S))
        it += 1
        if n == 0 or (len(trace) > 1 and abs(trace[-1] - trace[-2]) < cfg.elbo_tol):
            converged = True
            break
        if it >= cfg.max_em_iters:
            break
        xi = m_step_xi(phis, mu, S)
    return VblrPosterior("fixed", mu, S, xi, trace, converged, iterations=it, jitter_events=jitter)


def elbo_terms(post, phis, ts, a0, b0):
    """The five ELBO contributions for the hierarchical model, by name."""
    phis, ts = _prep(phis, ts)
    mu, S, xi = post.mu, post.S, post.xi
    a_N, b_N = post.a_N, post.b_N
    P = mu.size
    lam = lambda_xi(xi)
    proj = phis @ mu
    quad = proj * proj + np.einsum("ij,jk,ik->i", phis, S, phis)
    e_log_h = float(np.sum(log_expit(xi) + proj * ts - 0.5 * (proj + xi) - lam * (quad - xi * xi)))
    e_log_alpha = digamma(a_N) - math.log(b_N)
    e_alpha = a_N / b_N
    e_wtw = float(mu @ mu) + float(np.trace(S))
    e_log_pw = -0.5 * P * _LOG_2PI + 0.5 * P * e_log_alpha - 0.5 * e_alpha * e_wtw
    e_log_palpha = a0 * math.log(b0) + (a0 - 1.0) * e_log_alpha - b0 * e_alpha - log_gamma(a0)
    L, _ = cholesky_retry(S)
    logdet_S = 2.0 * float(np.sum(np.log(np.diag(L))))
    entropy_w = 0.5 * logdet_S + 0.5 * P * (1.0 + _LOG_2PI)
    entropy_alpha = log_gamma(a_N) - (a_N - 1.0) * digamma(a_N) - math.log(b_N) + a_N
    return {
        "e_log_h": e_log_h,
        "e_log_p_w": e_log_pw,
        "e_log_p_alpha": e_log_palpha,
        "entropy_w": entropy_w,
        "entropy_alpha": entropy_alpha,
    }


def elbo(post, phis, ts, cfg):
    if post.a_N is None:
        raise ValueError("elbo() needs a hierarchical-mode posterior")
    return sum(elbo_terms(post, phis, ts, cfg.a0, cfg.b0).values())


def fit_hierarchical(phis, ts, cfg):
    phis, ts = _prep(phis, ts)
    n, P = phis.shape
    a0, b0 = float(cfg.a0), float(cfg.b0)
    a_N = a0 + 0.5 * P
    e_alpha = a0 / b0
    xi = np.full(n, float(cfg.xi_init))
    lin = phis.T @ (ts - 0.5)
    trace = []
    jitter = 0
    converged = False
    it = 0
    while True:
        prec = e_alpha * np.eye(P) + _data_precision(phis, xi)
        mu, S, _, jittered = _gaussian_from_precision(prec, lin)
        jitter += jittered
        b_N = b0 + 0.5 * (float(mu @ mu) + float(np.trace(S)))
        e_alpha = a_N / b_N
        if n:
            xi = m_step_xi(phis, mu, S)
        post = VblrPosterior("hierarchical", mu, S, xi, trace, False, a_N=a_N, b_N=b_N)
        trace.append(elbo(post, phis, ts, cfg))
        it += 1
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < cfg.elbo_tol:
            converged = True
            break
        if it >= cfg.max_em_iters:
            break
    post.converged = converged
    post.iterations = it
    post.jitter_events = jitter
    return post


def fit(phis, ts, cfg):
    return fit_hierarchical(phis, ts, cfg) if cfg.prior == "hierarchical" else fit_fixed(phis, ts, cfg)


def predict_proba_mc(post, phi, mc_samples=2000, rng=None):
    """Monte Carlo estimate of E_q[sigma(w.phi)] and its standard error.

    ``phi`` may be one feature vector or a matrix of rows; all rows share the
    same weight draws. ``rng`` is a numpy Generator or an integer seed.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = make_rng(0 if rng is None else int(rng), "vblr-predict")
    phi = np.asarray(phi, dtype=float)
    single = phi.ndim == 1
    phis = np.atleast_2d(phi)
    if phis.shape[1] != post.mu.size:
        raise ValueError(f"dimension mismatch: {phis.shape[1]} vs {post.mu.size}")
    W = sample_mvn(post.mu, None, mc_samples, rng, chol=post.chol)
    probs = expit(W @ phis.T)
    mean = probs.mean(axis=0)
    if mc_samples > 1:
        se = probs.std(axis=0, ddof=1) / math.sqrt(mc_samples)
    else:
        se = np.full_like(mean, np.inf)
    if single:
        return float(mean[0]), float(se[0])
    return mean, se
