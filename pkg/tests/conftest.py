import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
WDBC_PATH = os.path.join(ROOT, "data", "wdbc.data")


@pytest.fixture(scope="session")
def wdbc_path():
    return WDBC_PATH


@pytest.fixture(scope="session")
def wdbc():
    from diagkit.dataset import load_wdbc

    return load_wdbc(WDBC_PATH)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(mod.RESULTS, key=lambda c: (int(c[0]), c)):
        passed, detail = mod.RESULTS[cid]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {cid}: {detail}")
