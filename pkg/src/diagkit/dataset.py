"""WDBC parsing, z-score standardization, train/test splits and k-fold indices."""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .numerics import make_rng

__all__ = [
    "ParseError",
    "DegenerateColumn",
    "BadFoldCount",
    "LabeledDataset",
    "Standardizer",
    "SplitSpec",
    "N_FEATURES",
    "parse_wdbc",
    "load_wdbc",
    "serialize_wdbc",
    "fit_standardizer",
    "apply_standardizer",
    "split",
    "split_indices",
    "kfold",
]

N_FEATURES = 30
BENIGN, MALIGNANT = "B", "M"


class ParseError(ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class DegenerateColumn(ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"column {index} has zero variance")


class BadFoldCount(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Cases as rows of ``features``; ``labels`` hold 'B' / 'M' codes."""

    features: np.ndarray
    labels: tuple
    ids: tuple

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if not (feats.shape[0] == len(self.labels) == len(self.ids)):
            raise ValueError("features, labels and ids must have the same length")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        bad = set(self.labels) - {BENIGN, MALIGNANT}
        if bad:
            raise ValueError(f"unknown label codes {sorted(bad)}")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self):
        return len(self.labels)

    @property
    def is_malignant(self):
        return np.array([lab == MALIGNANT for lab in self.labels], dtype=bool)

    @property
    def y_pm(self):
        """Labels as +1 (Malignant) / -1 (Benign)."""
        return np.where(self.is_malignant, 1.0, -1.0)

    @property
    def y01(self):
        """Labels as 1 (Malignant) / 0 (Benign)."""
        return self.is_malignant.astype(float)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return LabeledDataset(
            self.features[idx],
            tuple(self.labels[i] for i in idx),
            tuple(self.ids[i] for i in idx),
        )

    def with_features(self, features):
        return LabeledDataset(features, self.labels, self.ids)

    def class_counts(self):
        m = int(self.is_malignant.sum())
        return {BENIGN: len(self) - m, MALIGNANT: m}


def parse_wdbc(text, source=None, n_features=N_FEATURES):
    """Parse WDBC CSV text (no header): ``id, B|M, <30 decimals>`` per line.

    ``text`` may be a string or a text stream. Blank lines and CRLF endings
    are accepted; anything else malformed raises :class:`ParseError` with the
    1-based line number.
    """
    if not isinstance(text, str):
        text = text.read()
    rows, labels, ids = [], [], []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != n_features + 2:
            raise ParseError(
                f"expected {n_features + 2} fields, found {len(fields)}", lineno, source
            )
        case_id, diag, *values = fields
        if not case_id:
            raise ParseError("empty case id", lineno, source)
        if diag not in (BENIGN, MALIGNANT):
            raise ParseError(f"unknown diagnosis code {diag!r}", lineno, source)
        try:
            row = [float(v) for v in values]
        except ValueError as exc:
            raise ParseError(f"bad number: {exc}", lineno, source) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite feature value", lineno, source)
        rows.append(row)
        labels.append(diag)
        ids.append(case_id)
    if not rows:
        raise ParseError("no data rows", None, source)
    return LabeledDataset(np.array(rows, dtype=float), tuple(labels), tuple(ids))


def load_wdbc(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_wdbc(fh, source=os.fspath(path))


def serialize_wdbc(data):
    """Inverse of :func:`parse_wdbc` (shortest round-trip float repr)."""
    out = io.StringIO()
    for cid, lab, row in zip(data.ids, data.labels, data.features):
        out.write(",".join([str(cid), lab, *(repr(float(v)) for v in row)]))
        out.write("\n")
    return out.getvalue()


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    ddof: int = 1

    def apply(self, features):
        return apply_standardizer(self, features)

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "ddof": self.ddof}


def fit_standardizer(data, ddof=1):
    """Per-column mean and standard deviation (``ddof=1`` → sample std)."""
    x = data.features if isinstance(data, LabeledDataset) else np.asarray(data, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("need at least two rows to standardize")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=ddof)
    for j, s in enumerate(std):
        if not s > 0.0:
            raise DegenerateColumn(j)
    return Standardizer(mean, std, ddof)


def apply_standardizer(s, features):
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != s.mean.size:
        raise ValueError(
            f"dimension mismatch: standardizer has {s.mean.size} columns, got shape {x.shape}"
        )
    return (x - s.mean) / s.std


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split_indices(is_positive, spec):
    """Index arrays ``(train, test)`` for a boolean class vector.

    The train size is ``round(train_fraction * n)``. In stratified mode each
    class contributes ``floor(f * n_c)`` rows and the leftover slots go to the
    classes with the largest fractional remainders (ties to the larger class).
    """
    is_positive = np.asarray(is_positive, dtype=bool)
    n = is_positive.size
    n_train = _round_half_up(spec.train_fraction * n)
    rng = make_rng(spec.seed, "split")
    if not spec.stratified:
        perm = rng.permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])

    groups = [np.flatnonzero(~is_positive), np.flatnonzero(is_positive)]
    exact = [spec.train_fraction * g.size for g in groups]
    take = [int(math.floor(e)) for e in exact]
    order = sorted(range(2), key=lambda c: (-(exact[c] - take[c]), -groups[c].size, c))
    for c in order[: n_train - sum(take)]:
        take[c] += 1
    train, test = [], []
    for g, t in zip(groups, take):
        perm = g[rng.permutation(g.size)]
        train.append(perm[:t])
        test.append(perm[t:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(data, spec):
    tr, te = split_indices(data.is_malignant, spec)
    return data.subset(tr), data.subset(te)


def kfold(n, k, seed):
    """List of ``(train_idx, val_idx)`` pairs; fold sizes differ by at most 1."""
    if not 2 <= k <= n:
        raise BadFoldCount(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = make_rng(seed, "kfold").permutation(n)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    folds, start = [], 0
    for size in sizes:
        val = np.sort(perm[start:start + size])
        train = np.sort(np.concatenate([perm[:start], perm[start + size:]]))
        folds.append((train, val))
        start += size
    return folds
