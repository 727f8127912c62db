"""Kernel functions and Gram matrices.

Families: ``linear`` (x.y), homogeneous ``poly`` ((x.y)^d), ``rbf``
(exp(-gamma |x-y|^2)) and ``tanh`` (tanh(kappa x.y + c)). Specs parse from
and print to the compact form ``rbf:gamma=0.05``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["KernelSpec", "parse_kernel", "kernel_eval", "gram", "cross_gram"]

FAMILIES = ("linear", "poly", "rbf", "tanh")


@dataclass(frozen=True)
class KernelSpec:
    family: str
    degree: int = 1
    gamma: float = 1.0
    kappa: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "poly" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"polynomial degree must be a positive integer, got {self.degree}")
        if self.family == "rbf" and not self.gamma > 0:
            raise ValueError(f"rbf gamma must be > 0, got {self.gamma}")
        if self.family == "tanh" and not (math.isfinite(self.kappa) and math.isfinite(self.c)):
            raise ValueError("tanh parameters must be finite")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def poly(cls, d):
        return cls("poly", degree=int(d))

    @classmethod
    def rbf(cls, gamma):
        return cls("rbf", gamma=float(gamma))

    @classmethod
    def tanh(cls, kappa, c):
        return cls("tanh", kappa=float(kappa), c=float(c))

    @property
    def params(self):
        if self.family == "poly":
            return {"d": self.degree}
        if self.family == "rbf":
            return {"gamma": self.gamma}
        if self.family == "tanh":
            return {"kappa": self.kappa, "c": self.c}
        return {}

    @property
    def is_psd(self):
        """False for ``tanh``, which is not positive semi-definite in general."""
        return self.family != "tanh"

    def __str__(self):
        if not self.params:
            return self.family
        return self.family + ":" + ",".join(f"{k}={v!r}" for k, v in self.params.items())

    def to_dict(self):
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        fam = d.pop("family")
        return parse_kernel(fam + (":" + ",".join(f"{k}={v!r}" for k, v in d.items()) if d else ""))


_ALIASES = {"poly": {"d": "degree", "degree": "degree"},
            "rbf": {"gamma": "gamma"},
            "tanh": {"kappa": "kappa", "c": "c"},
            "linear": {}}


def parse_kernel(text):
    """Parse ``linear``, ``poly:d=3``, ``rbf:gamma=0.05`` or ``tanh:kappa=0.001,c=-1``."""
    fam, _, rest = text.strip().partition(":")
    fam = fam.strip().lower()
    if fam not in FAMILIES:
        raise ValueError(f"unknown kernel family {fam!r} in {text!r}")
    kwargs = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            key = key.strip()
            if not eq or key not in _ALIASES[fam]:
                raise ValueError(f"bad kernel parameter {item!r} for {fam}")
            kwargs[_ALIASES[fam][key]] = float(val)
    if "degree" in kwargs:
        if kwargs["degree"] != int(kwargs["degree"]):
            raise ValueError(f"polynomial degree must be an integer in {text!r}")
        kwargs["degree"] = int(kwargs["degree"])
    required = set(_ALIASES[fam].values())
    if set(kwargs) != required:
        raise ValueError(f"kernel {fam} requires parameters {sorted(required)}, got {text!r}")
    return KernelSpec(fam, **kwargs)


def kernel_eval(spec, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if spec.family == "rbf":
        d = x - y
        return math.exp(-spec.gamma * float(d @ d))
    dot = float(x @ y)
    if spec.family == "linear":
        return dot
    if spec.family == "poly":
        return dot ** spec.degree
    return math.tanh(spec.kappa * dot + spec.c)


def _from_dots(spec, dots, sq_a=None, sq_b=None):
    if spec.family == "linear":
        return dots
    if spec.family == "poly":
        return dots ** spec.degree
    if spec.family == "tanh":
        return np.tanh(spec.kappa * dots + spec.c)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * dots
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-spec.gamma * d2)


def cross_gram(spec, a, b):
    """Kernel values between rows of ``a`` (m, p) and rows of ``b`` (n, p)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]} columns")
    dots = a @ b.T
    if spec.family == "rbf":
        return _from_dots(spec, dots, np.einsum("ij,ij->i", a, a), np.einsum("ij,ij->i", b, b))
    return _from_dots(spec, dots)


def gram(spec, xs):
    """Symmetric Gram matrix; each unordered pair is evaluated once."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    g = cross_gram(spec, xs, xs)
    # mirror the upper triangle so G == G.T bit for bit
    iu = np.triu_indices(g.shape[0], 1)
    g[(iu[1], iu[0])] = g[iu]
    if spec.family == "rbf":
        np.fill_diagonal(g, 1.0)
    return g
