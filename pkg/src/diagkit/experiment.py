"""End-to-end comparison protocol.

load -> split -> standardize on the training rows -> per-method CV grid search
on the training split -> refit on the full training split -> score the test
split. Every random stream is derived from the experiment seed plus a fixed
key, so results do not depend on execution order or thread count.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from . import __version__
from .dataset import SplitSpec, fit_standardizer, kfold, load_wdbc, split
from .kernels import KernelSpec, gram
from .knn import knn_fit, knn_scores, knn_select_k, knn_train_scores
from .logreg import add_bias, logreg_fit
from .metrics import accuracy_vs_cutoff, confusion, roc_curve, sweep_to_csv
from .numerics import make_rng
from .svm import NoConvergence, SvmConfig, svm_train
from .vblr import VblrConfig, fit as vblr_fit, predict_proba_mc

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
METHODS = ("svm_rbf", "svm_poly", "svm_tanh", "knn", "logreg", "vblr")


class UnknownMethod(ValueError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown method {name!r}; valid methods: {', '.join(METHODS)}")


@dataclass
class ExperimentConfig:
    data: str
    seed: int = 0
    train_fraction: float = 0.8
    stratified: bool = True
    cv_folds: int = 10
    C_grid: tuple = (0.1, 1.0, 10.0, 100.0)
    # homogeneous (x.y)^d on z-scored 30-dim rows is ~30^d in size; useful C sits lower
    poly_C_grid: tuple = (1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0)
    gamma_grid: tuple = (0.01, 0.033, 0.1, 0.33)
    degree_grid: tuple = (2, 3)
    tanh_grid: tuple = ((1 / 30, -1.0), (0.001, -0.1))
    svm_tol: float = 1e-3
    knn_ks: tuple = (1, 3, 10)
    knn_train_mode: str = "self"  # "self" counts a row as its own neighbour, "loo" does not
    logreg_ridge: float = 1e-8
    vblr_prior: str = "hierarchical"
    vblr_a0: float = 1e-2
    vblr_b0: float = 1e-2
    vblr_prior_scale: float = 10.0
    vblr_max_em_iters: int = 500
    mc_samples: int = 2000
    out_dir: str | None = None
    jobs: int = 1
    methods: tuple = METHODS
    # methods fed unscaled features; SVMs always see z-scored ones
    raw_feature_methods: tuple = ("knn", "logreg", "vblr")

    def __post_init__(self):
        for name in self.methods:
            if name not in METHODS:
                raise UnknownMethod(name)
        for name in self.raw_feature_methods:
            if name not in ("knn", "logreg", "vblr"):
                raise ValueError(f"raw features are only available for knn, logreg and vblr, not {name!r}")
        grids = {"C_grid": self.C_grid, "poly_C_grid": self.poly_C_grid, "gamma_grid": self.gamma_grid,
                 "degree_grid": self.degree_grid, "tanh_grid": self.tanh_grid, "knn_ks": self.knn_ks}
        for key, grid in grids.items():
            if not len(grid):
                raise ValueError(f"{key} is empty")
        if self.knn_train_mode not in ("self", "loo"):
            raise ValueError("knn_train_mode must be 'self' or 'loo'")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def echo(self):
        d = asdict(self)
        d.pop("out_dir")
        d.pop("jobs")
        d["data"] = os.path.basename(self.data)
        d["tanh_grid"] = [list(p) for p in self.tanh_grid]
        for k in ("C_grid", "poly_C_grid", "gamma_grid", "degree_grid", "knn_ks", "methods",
                  "raw_feature_methods"):
            d[k] = list(d[k])
        return d


@dataclass
class Prepared:
    """Train/test arrays for one seed, z-scored with training statistics."""

    train: object
    test: object
    standardizer: object
    X_train: np.ndarray
    X_test: np.ndarray
    folds: list

    def features_for(self, name, cfg):
        """``(X_train, X_test)`` as seen by method ``name``."""
        if name in cfg.raw_feature_methods:
            return np.asarray(self.train.features), np.asarray(self.test.features)
        return self.X_train, self.X_test

    @property
    def y_train_pm(self):
        return self.train.y_pm

    @property
    def y_test01(self):
        return self.test.y01


def prepare(cfg, data=None):
    data = data if data is not None else load_wdbc(cfg.data)
    train, test = split(data, SplitSpec(cfg.train_fraction, int(cfg.seed), cfg.stratified))
    std = fit_standardizer(train)
    folds = kfold(len(train), cfg.cv_folds, int(cfg.seed))
    return Prepared(train, test, std, std.apply(train.features), std.apply(test.features), folds)


@dataclass
class MethodResult:
    name: str
    status: str
    hyperparams: dict
    train_scores: np.ndarray
    test_scores: np.ndarray
    test_probs: np.ndarray  # scores mapped into [0, 1] for the cutoff sweep
    train_pred: np.ndarray  # 1 = Malignant
    test_pred: np.ndarray
    details: dict = field(default_factory=dict)
    seconds: float = 0.0


# ---------------------------------------------------------------- SVM

def _kernel_candidates(family, cfg):
    if family == "rbf":
        return [KernelSpec.rbf(g) for g in cfg.gamma_grid]
    if family == "poly":
        return [KernelSpec.poly(d) for d in cfg.degree_grid]
    if family == "tanh":
        return [KernelSpec.tanh(k, c) for k, c in cfg.tanh_grid]
    raise ValueError(family)


def _fit_or_last(X, y, scfg, K):
    try:
        return svm_train(X, y, scfg, K=K), True
    except NoConvergence as exc:
        return exc.model, False


def svm_grid_search(X, y, family, cfg, folds):
    """Mean CV error for every (kernel, C) pair.

    Returns ``(best_kernel, best_C, table)``; ties go to smaller C, then to the
    earlier kernel parameter in grid order.
    """
    rows = []
    for spec in _kernel_candidates(family, cfg):
        K = gram(spec, X)
        for C in (cfg.poly_C_grid if family == "poly" else cfg.C_grid):
            scfg = SvmConfig(spec, C=float(C), tol=cfg.svm_tol)
            errs = []
            unconverged = 0
            for tr, va in folds:
                model, ok = _fit_or_last(X[tr], y[tr], scfg, K[np.ix_(tr, tr)])
                unconverged += not ok
                Kva = K[np.ix_(va, tr[model.support_index])]
                f = Kva @ (model.alphas * model.support_labels) + model.bias
                errs.append(float(np.mean(np.where(f >= 0, 1.0, -1.0) != y[va])))
            rows.append({"kernel": str(spec), "C": float(C), "cv_error": float(np.mean(errs)),
                         "unconverged_folds": unconverged, "_spec": spec})
    order = {id(r): i for i, r in enumerate(rows)}
    sort_key = _kernel_sort_key(family)
    best = min(rows, key=lambda r: (r["cv_error"], r["C"], sort_key(r["_spec"]), order[id(r)]))
    table = [{k: v for k, v in r.items() if k != "_spec"} for r in rows]
    return best["_spec"], best["C"], table


def _kernel_sort_key(family):
    if family == "rbf":
        return lambda s: s.gamma
    if family == "poly":
        return lambda s: s.degree
    return lambda s: 0.0


def run_svm(family, prep, cfg):
    X, y = prep.X_train, prep.y_train_pm
    spec, C, table = svm_grid_search(X, y, family, cfg, prep.folds)
    model, ok = _fit_or_last(X, y, SvmConfig(spec, C=C, tol=cfg.svm_tol), None)
    f_train = model.decision_function(X)
    f_test = model.decision_function(prep.X_test)
    return MethodResult(
        name=f"svm_{family}",
        status="ok" if ok else "no_convergence",
        hyperparams={"kernel": str(spec), **spec.params, "C": C},
        train_scores=f_train,
        test_scores=f_test,
        test_probs=expit(f_test),
        train_pred=(f_train >= 0).astype(int),
        test_pred=(f_test >= 0).astype(int),
        details={"cv": table, "n_support": model.n_support, "iterations": model.iterations},
    )


# ---------------------------------------------------------------- KNN

def run_knn(prep, cfg):
    X, X_test = prep.features_for("knn", cfg)
    y = prep.train.y01.astype(int)
    best_k, cv_errors = knn_select_k(X, y, cfg.knn_ks, prep.folds)
    per_k = {}
    for k in sorted(set(cfg.knn_ks)):
        m = knn_fit(X, y, k)
        s_test = knn_scores(m, X_test)
        s_self = knn_train_scores(m, leave_one_out=False)
        s_loo = knn_train_scores(m, leave_one_out=True)
        test_cm = confusion((s_test > 0.5).astype(int), prep.y_test01)
        per_k[str(k)] = {
            "cv_error": cv_errors[k],
            "test_error": test_cm.error_rate,
            "test_misses": test_cm.misses,
            "train_error_self": confusion((s_self > 0.5).astype(int), y).error_rate,
            "train_error_loo": confusion((s_loo > 0.5).astype(int), y).error_rate,
            "auc": roc_curve(s_test, prep.y_test01).auc,
        }
    model = knn_fit(X, y, best_k)
    s_train = knn_train_scores(model, leave_one_out=cfg.knn_train_mode == "loo")
    s_test = knn_scores(model, X_test)
    return MethodResult(
        name="knn",
        status="ok",
        hyperparams={"k": best_k, "train_mode": cfg.knn_train_mode},
        train_scores=s_train,
        test_scores=s_test,
        test_probs=s_test,
        train_pred=(s_train > 0.5).astype(int),
        test_pred=(s_test > 0.5).astype(int),
        details={"per_k": per_k},
    )


# ---------------------------------------------------------------- logistic models

def run_logreg(prep, cfg):
    phi_tr, phi_te = map(add_bias, prep.features_for("logreg", cfg))
    model = logreg_fit(phi_tr, prep.train.y01, ridge=cfg.logreg_ridge)
    p_tr = model.predict_proba(phi_tr)
    p_te = model.predict_proba(phi_te)
    return MethodResult(
        name="logreg",
        status="ok" if model.converged else "max_iter",
        hyperparams={"ridge": cfg.logreg_ridge},
        train_scores=p_tr,
        test_scores=p_te,
        test_probs=p_te,
        train_pred=(p_tr >= 0.5).astype(int),
        test_pred=(p_te >= 0.5).astype(int),
        details={"iterations": model.iterations, "weight_norm": float(np.linalg.norm(model.weights))},
    )


def run_vblr(prep, cfg):
    phi_tr, phi_te = map(add_bias, prep.features_for("vblr", cfg))
    vcfg = VblrConfig(prior=cfg.vblr_prior, a0=cfg.vblr_a0, b0=cfg.vblr_b0,
                      prior_scale=cfg.vblr_prior_scale, max_em_iters=cfg.vblr_max_em_iters,
                      mc_samples=cfg.mc_samples, seed=int(cfg.seed))
    post = vblr_fit(phi_tr, prep.train.y01, vcfg)
    rng = make_rng(int(cfg.seed), "vblr", "predict")
    p_all, _ = predict_proba_mc(post, np.vstack([phi_tr, phi_te]), cfg.mc_samples, rng)
    n_tr = phi_tr.shape[0]
    p_tr, p_te = p_all[:n_tr], p_all[n_tr:]
    hyper = {"prior": cfg.vblr_prior, "mc_samples": cfg.mc_samples}
    if cfg.vblr_prior == "hierarchical":
        hyper.update(a0=cfg.vblr_a0, b0=cfg.vblr_b0)
    else:
        hyper.update(prior_scale=cfg.vblr_prior_scale)
    details = {"em_iterations": post.iterations, "final_bound": post.elbo_trace[-1],
               "jitter_events": post.jitter_events}
    if post.a_N is not None:
        details.update(a_N=post.a_N, b_N=post.b_N, expected_alpha=post.expected_alpha)
    return MethodResult(
        name="vblr",
        status="ok" if post.converged else "max_em_iters",
        hyperparams=hyper,
        train_scores=p_tr,
        test_scores=p_te,
        test_probs=p_te,
        train_pred=(p_tr >= 0.5).astype(int),
        test_pred=(p_te >= 0.5).astype(int),
        details=details,
    )


def run_method(name, prep, cfg):
    t0 = time.perf_counter()
    if name.startswith("svm_"):
        res = run_svm(name[4:], prep, cfg)
    elif name == "knn":
        res = run_knn(prep, cfg)
    elif name == "logreg":
        res = run_logreg(prep, cfg)
    elif name == "vblr":
        res = run_vblr(prep, cfg)
    else:
        raise UnknownMethod(name)
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- report

def _method_entry(res, prep, cfg):
    train_cm = confusion(res.train_pred, prep.train.y01)
    test_cm = confusion(res.test_pred, prep.y_test01)
    roc = roc_curve(res.test_scores, prep.y_test01)
    return {
        "name": res.name,
        "status": res.status,
        "hyperparams": res.hyperparams,
        "features": "raw" if res.name in cfg.raw_feature_methods else "standardized",
        "train_error": train_cm.error_rate,
        "train_misses": train_cm.misses,
        "test_error": test_cm.error_rate,
        "test_misses": test_cm.misses,
        "auc": roc.auc,
        "accuracy": test_cm.accuracy,
        "confusion": {"tp": test_cm.tp, "fp": test_cm.fp, "tn": test_cm.tn, "fn": test_cm.fn},
        "roc_file": f"roc_{res.name}.csv",
        "accuracy_file": f"accuracy_{res.name}.csv",
        "details": res.details,
        "timing": {"seconds": res.seconds},
    }, roc


def _failed_entry(name, exc):
    return {
        "name": name, "status": "failed", "error": f"{type(exc).__name__}: {exc}",
        "hyperparams": {}, "features": None, "train_error": None, "train_misses": None, "test_error": None,
        "test_misses": None, "auc": None, "accuracy": None, "roc_file": None,
        "accuracy_file": None, "details": {}, "timing": {"seconds": 0.0},
    }


def _run_guarded(name, prep, cfg):
    try:
        return run_method(name, prep, cfg)
    except Exception as exc:  # one method failing must not abort the others
        log.warning("method %s failed: %s", name, exc)
        return exc


def run_comparison(cfg, data=None):
    """Run every configured method. Returns ``(report, artifacts)``.

    ``artifacts`` maps output file names to their CSV text.
    """
    t0 = time.perf_counter()
    prep = prepare(cfg, data)
    names = list(cfg.methods)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(lambda n: _run_guarded(n, prep, cfg), names))
    else:
        outcomes = [_run_guarded(n, prep, cfg) for n in names]

    entries, artifacts = [], {}
    for name, out in zip(names, outcomes):
        if isinstance(out, Exception):
            entries.append(_failed_entry(name, out))
            continue
        entry, roc = _method_entry(out, prep, cfg)
        entries.append(entry)
        artifacts[entry["roc_file"]] = roc.to_csv()
        artifacts[entry["accuracy_file"]] = sweep_to_csv(accuracy_vs_cutoff(out.test_probs, prep.y_test01))
    entries.sort(key=lambda e: (-(e["auc"] if e["auc"] is not None else -math.inf), e["name"]))

    counts_tr = prep.train.class_counts()
    counts_te = prep.test.class_counts()
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "library_version": __version__,
        "config": cfg.echo(),
        "preprocessing": {
            "standardization": "z-score with training-split mean and sample std (ddof=1)",
            "standardized_methods": [m for m in cfg.methods if m not in cfg.raw_feature_methods],
            "raw_feature_methods": [m for m in cfg.methods if m in cfg.raw_feature_methods],
            "feature_map_logistic": "[1, x]",
            "standardizer": prep.standardizer.to_dict(),
            "n_train": len(prep.train),
            "n_test": len(prep.test),
            "train_class_counts": counts_tr,
            "test_class_counts": counts_te,
            "split": "stratified" if cfg.stratified else "simple random",
        },
        "methods": entries,
        "timing": {"total_seconds": time.perf_counter() - t0},
    }
    return report, artifacts


def strip_timing(obj):
    """Copy of a report with every ``timing`` subobject removed."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def dumps_report(report):
    return json.dumps(report, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_outputs(report, artifacts, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps_report(report))
    for fname, text in artifacts.items():
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_table(report))


def format_table(report):
    cfg = report["config"]
    lines = [
        f"seed={cfg['seed']}  split={cfg['train_fraction']} "
        f"({'stratified' if cfg['stratified'] else 'random'})  folds={cfg['cv_folds']}  "
        f"n_train={report['preprocessing']['n_train']}  n_test={report['preprocessing']['n_test']}",
        "z-scored (training mean, sample std): "
        + (", ".join(report["preprocessing"]["standardized_methods"]) or "none")
        + "; raw features: " + (", ".join(report["preprocessing"]["raw_feature_methods"]) or "none"),
        "",
        f"{'method':<10} {'status':<15} {'test err':>10} {'miss':>5} {'train err':>10} {'miss':>5} "
        f"{'AUC':>9} {'accuracy':>9}  hyperparameters",
    ]
    for m in report["methods"]:
        if m["status"] == "failed":
            lines.append(f"{m['name']:<10} {'failed':<15} {m.get('error', '')}")
            continue
        hp = ", ".join(f"{k}={v}" for k, v in m["hyperparams"].items() if k != "kernel")
        lines.append(
            f"{m['name']:<10} {m['status']:<15} {m['test_error']:>10.6f} {m['test_misses']:>5d} "
            f"{m['train_error']:>10.6f} {m['train_misses']:>5d} {m['auc']:>9.6f} {m['accuracy']:>9.4%}  {hp}"
        )
    knn = next((m for m in report["methods"] if m["name"] == "knn" and m["status"] != "failed"), None)
    if knn:
        lines.append("")
        lines.append("knn by k:  k  test err  train err (self)  train err (loo)   cv err")
        for k, row in knn["details"]["per_k"].items():
            lines.append(f"{'':10} {k:>2}  {row['test_error']:.6f}  {row['train_error_self']:.6f}"
                         f"          {row['train_error_loo']:.6f}          {row['cv_error']:.6f}")
    return "\n".join(lines) + "\n"
