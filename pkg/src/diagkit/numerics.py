"""Dense linear algebra helpers, special functions and seeded sampling.

Random streams come from numpy's PCG64 bit generator. A stream is identified
by a 64-bit seed plus an optional tuple of string keys; the keys are hashed
with SHA-256 into the ``spawn_key`` of a :class:`numpy.random.SeedSequence`,
so a child stream depends only on ``(seed, keys)`` and never on the order in
which streams are created.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np

__all__ = [
    "NotPositiveDefinite",
    "DomainError",
    "symmetrize",
    "cholesky",
    "solve_spd",
    "inv_spd",
    "log_det_spd",
    "digamma",
    "log_gamma",
    "make_rng",
    "derive_rng",
    "sample_mvn",
]

JITTER = 1e-8


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly positive."""


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def cholesky(a, jitter=0.0):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    The input is symmetrized first. ``jitter`` is added to the diagonal
    before factorizing.
    """
    a = symmetrize(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if jitter:
        a = a + jitter * np.eye(a.shape[0])
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def cholesky_retry(a):
    """Cholesky with a single ``JITTER * I`` retry.

    Returns ``(L, jittered)``. A second failure propagates.
    """
    try:
        return cholesky(a), False
    except NotPositiveDefinite:
        return cholesky(a, jitter=JITTER), True


def _tri_solve(L, b):
    # forward then backward substitution through scipy when available
    from scipy.linalg import solve_triangular

    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y, lower=False)


def solve_spd(a, b):
    L = cholesky(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != L.shape[0]:
        raise ValueError(f"dimension mismatch: {L.shape[0]} vs {b.shape[0]}")
    return _tri_solve(L, b)


def inv_spd(a):
    L = cholesky(a)
    return symmetrize(_tri_solve(L, np.eye(L.shape[0])))


def log_det_spd(a):
    L = cholesky(a)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


# Bernoulli-number coefficients of the asymptotic expansions
# psi(x)    ~ ln x - 1/(2x) - sum_k B_2k / (2k x^2k)
# lnGamma(x)~ (x-1/2)ln x - x + ln(2 pi)/2 + sum_k B_2k / (2k(2k-1) x^(2k-1))
_B2K = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)
_SHIFT = 10.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def digamma(x):
    """Digamma function for ``x > 0`` (scalar)."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"digamma requires a finite x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    p = inv2
    for k, b in enumerate(_B2K, start=1):
        series += b / (2 * k) * p
        p *= inv2
    return acc + math.log(x) - 0.5 / x - series


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0`` (scalar)."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"log_gamma requires a finite x > 0, got {x}")
    prod = 1.0
    while x < _SHIFT:
        prod *= x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    p = inv
    for k, b in enumerate(_B2K, start=1):
        series += b / (2 * k * (2 * k - 1)) * p
        p *= inv2
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series - math.log(prod)


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed, *keys):
    """PCG64 generator for ``seed`` and an optional path of stream keys."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(_key_to_int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


derive_rng = make_rng


def sample_mvn(mu, cov, n, rng, chol=None):
    """Draw ``n`` samples ``mu + L z`` with ``z ~ N(0, I)`` from ``rng``.

    Returns an ``(n, dim)`` array. A covariance that fails Cholesky even
    after ``JITTER * I`` raises :class:`NotPositiveDefinite`; an all-zero
    covariance is treated as ``JITTER * I``.
    """
    mu = np.asarray(mu, dtype=float)
    if n < 1:
        raise ValueError("n must be >= 1")
    if chol is None:
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (mu.size, mu.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of size {mu.size}")
        if not np.any(cov):
            chol = math.sqrt(JITTER) * np.eye(mu.size)
        else:
            chol, _ = cholesky_retry(cov)
    z = rng.standard_normal((n, mu.size))
    return mu + z @ chol.T
