"""Command-line front end: ``inspect``, ``compare``, ``roc`` and ``cv``.

Exit codes: 0 success, 2 parse/config error, 3 every method failed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .dataset import ParseError, load_wdbc
from .experiment import (
    METHODS,
    ExperimentConfig,
    UnknownMethod,
    format_table,
    prepare,
    run_comparison,
    svm_grid_search,
    write_outputs,
)

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED = 0, 2, 3


class ConfigError(ValueError):
    pass


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def parse_grid(method, spec):
    """Turn ``"C=0.1,1;gamma=0.01,0.1"`` into ExperimentConfig field overrides.

    Keys per method: svm_rbf ``C``, ``gamma``; svm_poly ``C``, ``d``;
    svm_tanh ``C``, ``kc`` (``kappa/c`` pairs, e.g. ``kc=0.001/-0.1,0.033/-1``);
    knn ``k``; logreg ``ridge``.
    """
    allowed = {
        "svm_rbf": {"C": "C_grid", "gamma": "gamma_grid"},
        "svm_poly": {"C": "poly_C_grid", "d": "degree_grid"},
        "svm_tanh": {"C": "C_grid", "kc": "tanh_grid"},
        "knn": {"k": "knn_ks"},
        "logreg": {"ridge": "logreg_ridge"},
    }
    if method not in allowed:
        raise ConfigError(f"method {method!r} has no hyperparameter grid")
    out = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, eq, vals = part.partition("=")
        key = key.strip()
        if not eq or key not in allowed[method]:
            raise ConfigError(f"bad grid entry {part!r} for {method}; keys: {sorted(allowed[method])}")
        try:
            if key == "kc":
                pairs = []
                for item in vals.split(","):
                    k, _, c = item.partition("/")
                    pairs.append((float(k), float(c)))
                value = tuple(pairs)
            elif key in ("d", "k"):
                value = tuple(int(v) for v in vals.split(","))
            elif key == "ridge":
                nums = _floats(vals)
                if len(nums) != 1:
                    raise ConfigError("logreg accepts a single ridge value")
                value = nums[0]
            else:
                value = _floats(vals)
        except ValueError as exc:
            raise ConfigError(f"bad grid values in {part!r}: {exc}") from None
        out[allowed[method][key]] = value
    return out


def _add_common(p, need_method=False):
    p.add_argument("--data", required=True, help="WDBC CSV file (id, B|M, 30 features)")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--split", type=float, default=0.8, help="training fraction")
    p.add_argument("--stratified", type=_bool, default=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--mc-samples", type=int, default=2000)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="methods run concurrently")
    p.add_argument("--raw-features", default="knn,logreg,vblr",
                   help="comma list of methods fed unscaled features ('' = z-score all)")
    p.add_argument("--vblr-prior", choices=("hierarchical", "fixed"), default="hierarchical")
    p.add_argument("--knn-train-mode", choices=("self", "loo"), default="self")
    p.add_argument("--grid", action="append", default=[], metavar="METHOD:SPEC",
                   help='hyperparameter grid override, e.g. "svm_rbf:C=1,10;gamma=0.01"')
    if need_method:
        p.add_argument("--method", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="diagkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="dataset summary")
    p.add_argument("--data", required=True)

    p = sub.add_parser("compare", help="run the full comparison protocol")
    _add_common(p)

    p = sub.add_parser("roc", help="ROC curve CSV for one method on the test split")
    _add_common(p, need_method=True)

    p = sub.add_parser("cv", help="cross-validation table for one method's grid")
    _add_common(p, need_method=True)
    return parser


def config_from_args(args, methods=METHODS):
    overrides = {}
    for item in args.grid:
        method, sep, spec = item.partition(":")
        if not sep:
            raise ConfigError(f"--grid expects METHOD:SPEC, got {item!r}")
        if method not in METHODS:
            raise UnknownMethod(method)
        overrides.update(parse_grid(method, spec))
    raw = tuple(m.strip() for m in args.raw_features.split(",") if m.strip())
    return ExperimentConfig(
        data=args.data,
        seed=args.seed,
        train_fraction=args.split,
        stratified=args.stratified,
        cv_folds=args.folds,
        mc_samples=args.mc_samples,
        out_dir=args.out,
        jobs=max(1, args.jobs),
        raw_feature_methods=raw,
        vblr_prior=args.vblr_prior,
        knn_train_mode=args.knn_train_mode,
        methods=tuple(methods),
        **overrides,
    )


def cmd_inspect(args, out):
    data = load_wdbc(args.data)
    counts = data.class_counts()
    out.write(f"{len(data)} cases, {counts['B']} B / {counts['M']} M\n")
    out.write(f"{data.features.shape[1]} features\n")
    out.write(f"{'feature':>8} {'min':>12} {'mean':>12} {'max':>12}\n")
    X = data.features
    for j, (lo, mu, hi) in enumerate(zip(X.min(0), X.mean(0), X.max(0))):
        out.write(f"{j:>8d} {lo:>12.6g} {mu:>12.6g} {hi:>12.6g}\n")
    return EXIT_OK


def cmd_compare(args, out):
    cfg = config_from_args(args)
    report, artifacts = run_comparison(cfg)
    if cfg.out_dir:
        write_outputs(report, artifacts, cfg.out_dir)
    out.write(format_table(report))
    if all(m["status"] == "failed" for m in report["methods"]):
        return EXIT_ALL_FAILED
    return EXIT_OK


def _check_method(name):
    if name not in METHODS:
        raise UnknownMethod(name)


def cmd_roc(args, out):
    _check_method(args.method)
    cfg = config_from_args(args, methods=(args.method,))
    report, artifacts = run_comparison(cfg)
    entry = report["methods"][0]
    if entry["status"] == "failed":
        sys.stderr.write(f"{args.method} failed: {entry.get('error')}\n")
        return EXIT_ALL_FAILED
    text = artifacts[entry["roc_file"]]
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, entry["roc_file"]), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_cv(args, out):
    from .knn import knn_select_k
    from .logreg import add_bias, logreg_fit

    _check_method(args.method)
    cfg = config_from_args(args, methods=(args.method,))
    prep = prepare(cfg)
    out.write(f"{cfg.cv_folds}-fold CV on {len(prep.train)} training cases (seed {cfg.seed})\n")
    if args.method.startswith("svm_"):
        spec, C, table = svm_grid_search(prep.X_train, prep.y_train_pm, args.method[4:], cfg, prep.folds)
        for row in table:
            flag = " *" if row["kernel"] == str(spec) and row["C"] == C else ""
            out.write(f"{row['kernel']:<40} C={row['C']:<8g} cv_error={row['cv_error']:.6f}"
                      f" unconverged={row['unconverged_folds']}{flag}\n")
    elif args.method == "knn":
        X, _ = prep.features_for("knn", cfg)
        best, errors = knn_select_k(X, prep.train.y01, cfg.knn_ks, prep.folds)
        for k, e in errors.items():
            out.write(f"k={k:<4d} cv_error={e:.6f}{' *' if k == best else ''}\n")
    else:
        X, _ = prep.features_for(args.method, cfg)
        y = prep.train.y01
        errs = []
        for tr, va in prep.folds:
            if args.method == "logreg":
                p = logreg_fit(add_bias(X[tr]), y[tr], ridge=cfg.logreg_ridge).predict_proba(add_bias(X[va]))
            else:
                from .experiment import Prepared, run_vblr
                sub = Prepared(prep.train.subset(tr), prep.train.subset(va), prep.standardizer,
                               prep.X_train[tr], prep.X_train[va], prep.folds)
                p = run_vblr(sub, cfg).test_probs
            errs.append(float(np.mean((p >= 0.5) != (y[va] == 1))))
        out.write(f"{args.method} cv_error={np.mean(errs):.6f}\n")
    return EXIT_OK


COMMANDS = {"inspect": cmd_inspect, "compare": cmd_compare, "roc": cmd_roc, "cv": cmd_cv}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (ParseError, ConfigError, UnknownMethod, ValueError, OSError) as exc:
        sys.stderr.write(f"diagkit: error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
