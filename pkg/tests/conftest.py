import os
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"
PLOT55 = DATA / "plot55.csv"


def dbh_path():
    """Location of the full DBH table, or None when it has not been supplied."""
    env = os.environ.get("DIFIT_DBH")
    for p in (env, DATA / "DBH.csv"):
        if p and Path(p).is_file():
            return Path(p)
    return None


@pytest.fixture
def plot55():
    from difit.io import load_dbh_pairs

    return load_dbh_pairs(PLOT55, 55)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


DBH_MISSING = ("DBH dataset not found; set DIFIT_DBH to the public DBH.csv "
               "or copy it to tests/data/DBH.csv")

_LINES = pytest.StashKey[list]()
_START = pytest.StashKey[float]()


class Criterion:
    """Named checks for one acceptance criterion, reported as a single line."""

    def __init__(self, config, label, title):
        self.config, self.label, self.title = config, label, title
        self.failures = []

    def check(self, name, ok, detail=""):
        if not ok:
            self.failures.append(f"{name} ({detail})" if detail else name)
        return ok

    def fail(self, reason):
        self.failures.append(reason)
        self.finish()

    def finish(self):
        status = "FAIL" if self.failures else "PASS"
        line = f"{status} criterion {self.label}: {self.title}"
        if self.failures:
            line += " | " + "; ".join(self.failures)
        self.config.stash[_LINES].append(line)
        print(line)
        if self.failures:
            pytest.fail(line, pytrace=False)


@pytest.fixture
def criterion(request):
    return lambda label, title: Criterion(request.config, label, title)


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_sessionstart(session):
    import time

    session.config.stash[_START] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, config):
    import time

    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    elapsed = time.perf_counter() - config.stash[_START]
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    status = "PASS" if elapsed < 120 else "FAIL"
    terminalreporter.write_line(f"{status} criterion 7 (suite runtime): {elapsed:.1f} s, limit 120 s")
