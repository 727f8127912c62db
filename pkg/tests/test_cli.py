import io
import json
import os
from importlib import resources

import jsonschema
import numpy as np
import pytest

from diagkit import cli
from diagkit.dataset import LabeledDataset
from diagkit.experiment import (
    METHODS,
    ExperimentConfig,
    UnknownMethod,
    dumps_report,
    prepare,
    run_comparison,
    strip_timing,
)


def _run(argv):
    out = io.StringIO()
    code = cli.main(argv, out=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def compare_dirs(tmp_path_factory, wdbc_path):
    dirs = {}
    for tag, jobs in (("a", 1), ("b", 1), ("c", 4)):
        d = tmp_path_factory.mktemp(f"compare_{tag}")
        code, text = _run(["compare", "--data", wdbc_path, "--seed", "2", "--out", str(d), "--jobs", str(jobs)])
        assert code == 0, text
        dirs[tag] = d
    return dirs


def _report(d):
    with open(d / "report.json", encoding="utf-8") as fh:
        return json.load(fh)


def test_inspect(wdbc_path):
    code, text = _run(["inspect", "--data", wdbc_path])
    assert code == 0
    assert text.splitlines()[0] == "569 cases, 357 B / 212 M"


def test_inspect_empty_and_truncated(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert _run(["inspect", "--data", str(empty)])[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("1,M," + ",".join(["1.0"] * 30) + "\n2,B,1.0,2.0\n")
    assert _run(["inspect", "--data", str(bad)])[0] == 2
    assert "line 2" in capsys.readouterr().err


def test_report_schema_and_method_set(compare_dirs):
    report = _report(compare_dirs["a"])
    schema = json.loads(resources.files("diagkit").joinpath("report_schema.json").read_text())
    jsonschema.validate(report, schema)
    assert {m["name"] for m in report["methods"]} == set(METHODS)
    for m in report["methods"]:
        assert m["status"] != "failed"
        for key in ("train_error", "train_misses", "test_error", "test_misses", "auc", "accuracy"):
            assert m[key] is not None
        assert m["test_misses"] == round(m["test_error"] * report["preprocessing"]["n_test"])
        assert os.path.exists(compare_dirs["a"] / m["roc_file"])
        assert os.path.exists(compare_dirs["a"] / m["accuracy_file"])
    aucs = [m["auc"] for m in report["methods"]]
    assert aucs == sorted(aucs, reverse=True)


def test_report_byte_identical_across_runs_and_jobs(compare_dirs):
    texts = [dumps_report(strip_timing(_report(compare_dirs[t]))) for t in "abc"]
    assert texts[0] == texts[1] == texts[2]
    for name in os.listdir(compare_dirs["a"]):
        if name.endswith(".csv"):
            assert (compare_dirs["a"] / name).read_bytes() == (compare_dirs["c"] / name).read_bytes()


def test_roc_file_endpoints(compare_dirs):
    lines = (compare_dirs["a"] / "roc_svm_rbf.csv").read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr"
    assert lines[1] == "inf,0.0,0.0"
    assert lines[-1].endswith(",1.0,1.0")
    thresholds = [float(line.split(",")[0]) for line in lines[1:]]
    assert thresholds == sorted(thresholds, reverse=True)


def test_roc_command_vblr_deterministic(wdbc_path, tmp_path):
    outs = []
    for tag in ("x", "y"):
        code, _ = _run(["roc", "--data", wdbc_path, "--seed", "4", "--method", "vblr",
                        "--mc-samples", "2000", "--out", str(tmp_path / tag)])
        assert code == 0
        outs.append((tmp_path / tag / "roc_vblr.csv").read_bytes())
    assert outs[0] == outs[1]


def test_roc_unknown_method(wdbc_path, capsys):
    code, _ = _run(["roc", "--data", wdbc_path, "--method", "svm_quantum"])
    assert code == 2
    err = capsys.readouterr().err
    assert "svm_quantum" in err and all(m in err for m in METHODS)


def test_cv_command(wdbc_path):
    code, text = _run(["cv", "--data", wdbc_path, "--method", "svm_rbf", "--grid", "svm_rbf:C=1,10;gamma=0.01,0.1"])
    assert code == 0
    rows = [line for line in text.splitlines() if line.startswith("rbf:")]
    assert len(rows) == 4
    assert sum(line.endswith("*") for line in rows) == 1
    code, text = _run(["cv", "--data", wdbc_path, "--method", "knn", "--grid", "knn:k=1,5"])
    assert code == 0 and "k=5" in text


@pytest.mark.parametrize(
    "argv",
    [
        ["compare", "--data", "{d}", "--grid", "svm_rbf:sigma=1"],
        ["compare", "--data", "{d}", "--grid", "nope"],
        ["compare", "--data", "{d}", "--seed", "-1"],
        ["compare", "--data", "{d}", "--stratified", "maybe"],
        ["compare", "--data", "{d}", "--split", "1.5"],
        ["bogus"],
    ],
)
def test_config_errors_exit_2(argv, wdbc_path):
    assert _run([a.format(d=wdbc_path) for a in argv])[0] == 2


def test_parse_grid():
    assert cli.parse_grid("svm_tanh", "kc=0.001/-0.1,0.5/-1;C=1") == {
        "tanh_grid": ((0.001, -0.1), (0.5, -1.0)), "C_grid": (1.0,)}
    assert cli.parse_grid("svm_poly", "d=2,3") == {"degree_grid": (2, 3)}
    with pytest.raises(cli.ConfigError):
        cli.parse_grid("vblr", "C=1")


def test_all_methods_failed_exit_3(wdbc_path, monkeypatch):
    from diagkit import experiment

    def boom(name, prep, cfg):
        raise FloatingPointError(f"{name} exploded")

    monkeypatch.setattr(experiment, "run_method", boom)
    code, text = _run(["compare", "--data", wdbc_path, "--seed", "0"])
    assert code == 3
    assert text.count("failed") == len(METHODS)


def test_unknown_method_in_config(wdbc_path):
    with pytest.raises(UnknownMethod):
        ExperimentConfig(data=wdbc_path, methods=("svm_rbf", "svm_quantum"))


def test_no_test_leakage_into_standardizer(wdbc):
    cfg = ExperimentConfig(data="unused", seed=5)
    prep = prepare(cfg, wdbc)
    test_ids = set(prep.test.ids)
    feats = np.array(wdbc.features)
    for i, cid in enumerate(wdbc.ids):
        if cid in test_ids:
            feats[i] = feats[i] * 1000.0 + 7.0
    altered = prepare(cfg, LabeledDataset(feats, wdbc.labels, wdbc.ids))
    assert np.array_equal(prep.standardizer.mean, altered.standardizer.mean)
    assert np.array_equal(prep.standardizer.std, altered.standardizer.std)
    assert np.array_equal(prep.X_train, altered.X_train)


def test_standardized_vs_raw_feature_switch(wdbc):
    cfg = ExperimentConfig(data="unused", seed=1, methods=("knn",), raw_feature_methods=())
    report, _ = run_comparison(cfg, wdbc)
    assert report["methods"][0]["features"] == "standardized"
    assert report["preprocessing"]["standardized_methods"] == ["knn"]
