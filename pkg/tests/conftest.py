import os

import numpy as np
import pytest

from sead.io import DatasetSpec, gen_synthetic, load_csv

HERE = os.path.dirname(__file__)
ROOT = os.path.dirname(HERE)


def cardio_path():
    """Cardio CSV if available: $SEAD_CARDIO or data/cardio.csv (label in the last column)."""
    for p in (os.environ.get("SEAD_CARDIO"), os.path.join(ROOT, "data", "cardio.csv")):
        if p and os.path.exists(p):
            return p
    return None


@pytest.fixture(scope="session")
def cardio():
    p = cardio_path()
    if p is None:
        pytest.skip("Cardio not available: set SEAD_CARDIO or place data/cardio.csv")
    return load_csv(DatasetSpec(p, name="cardio"))


@pytest.fixture(scope="session")
def synth():
    return gen_synthetic(800, 5, 0.06, seed=11, name="data")


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance report: one line per criterion, printed at the end of the run ---

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``criterion(key, ok, detail)`` records one acceptance line."""

    def record(key, ok, detail):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        _ACCEPTANCE[key] = f"{status:<8} {detail}"
        return ok

    return record


def pytest_runtest_logreport(report):
    # Skipped Cardio criteria still get a line.
    if report.when == "setup" and report.skipped and "test_acceptance" in report.nodeid:
        key = report.nodeid.split("::")[-1]
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        _ACCEPTANCE.setdefault(key, f"{'SKIP':<8} {reason.replace('Skipped: ', '')}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=_order):
        tr.write_line(f"{key:<44} {_ACCEPTANCE[key]}")


def _order(key):
    import re

    m = re.search(r"c(\d+)", key)
    return (int(m.group(1)) if m else 99, key)
