import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import cascadesvm.solver as solver_mod  # noqa: E402
from cascadesvm import synthetic  # noqa: E402
from oracles import check_smo_invariants  # noqa: E402

SMO_RUNS = {"checked": 0}
ACCEPTANCE = []


@pytest.fixture(autouse=True)
def _smo_invariants(monkeypatch):
    """Every in-process SMO run in the suite is checked for dual feasibility and KKT."""
    original = solver_mod.smo_solve

    def checked(ds, cfg):
        state = original(ds, cfg)
        check_smo_invariants(ds, cfg, state)
        SMO_RUNS["checked"] += 1
        return state

    monkeypatch.setattr(solver_mod, "smo_solve", checked)
    yield


@pytest.fixture
def record_acceptance():
    def record(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
    terminalreporter.write_line(f"SMO runs checked for feasibility/KKT: {SMO_RUNS['checked']}")


@pytest.fixture
def blobs():
    return synthetic.noisy_blobs(200, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
