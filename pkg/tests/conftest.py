from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from choifilter import DmrgConfig, ModelParams, TruncationPolicy, prepare_initial_choi_state

DATA = Path(__file__).parent / "data"


@lru_cache(maxsize=None)
def rho0(J: float, L: int, h: float = 1.0):
    """Converged |rho0>> for a small ladder, shared across tests."""
    cfg = DmrgConfig(trunc=TruncationPolicy(max_bond=None, sv_cutoff=1e-12), energy_tol=1e-10, eigen_tol=1e-11)
    s, _ = prepare_initial_choi_state(ModelParams(J, L, h), cfg)
    return s


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed after the run
REPORT: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
