import time

import pytest

from hybridfts.examples import NOMINAL_SWEEP_RADII, get_example
from hybridfts.sweep import run_sweep

_ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE[criterion] = line
    print(line)


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])


@pytest.fixture(scope="session")
def paper():
    return get_example("paper")


@pytest.fixture(scope="session")
def nominal_sweep(paper):
    """The five-mode example over the nominal radii (0.25 .. 2) at 8 angles, with wall time."""
    t0 = time.perf_counter()
    evals = run_sweep(paper.system, paper.lyapunov, NOMINAL_SWEEP_RADII, 8, paper.config)
    return evals, time.perf_counter() - t0


@pytest.fixture(scope="session")
def basin_sweep(paper):
    """The five-mode example over its registry radii, where trajectories do settle."""
    t0 = time.perf_counter()
    evals = run_sweep(paper.system, paper.lyapunov, paper.radii, paper.directions, paper.config)
    return evals, time.perf_counter() - t0
