from importlib import resources

import numpy as np
import pytest

ACCEPTANCE = []


@pytest.fixture
def mini_corpus():
    return resources.files("ecokit") / "data" / "mini_corpus.csv"


@pytest.fixture
def acceptance():
    def record(criterion, ok, detail=""):
        ACCEPTANCE.append((criterion, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {crit}  {detail}")


def simulate_var(phi, intercept, T, sd, seed, trend=None):
    """Plain-numpy VAR(1) simulation started from zero (test oracle)."""
    phi = np.asarray(phi, dtype=float)
    b0 = np.asarray(intercept, dtype=float)
    b1 = np.zeros_like(b0) if trend is None else np.asarray(trend, dtype=float)
    rng = np.random.default_rng(seed)
    y = np.zeros((T, b0.size))
    prev = np.zeros(b0.size)
    for t in range(T):
        prev = b0 + b1 * t + phi @ prev + rng.normal(0.0, sd, b0.size)
        y[t] = prev
    return y


def make_panel(y, creation=None):
    from ecokit.ingest import GroupPanel

    y = np.asarray(y, dtype=float)
    M = y.shape[1]
    creation = np.zeros(M, dtype=int) if creation is None else np.asarray(creation)
    return GroupPanel([f"g{i}" for i in range(M)], y.T.copy(), creation)
