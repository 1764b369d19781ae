from __future__ import annotations

import time

import numpy as np
import pytest

from tugsys.domain import DomainSpec
from tugsys.markov import symmetric_generator
from tugsys.solver import ProblemSpec, solve


def constant(c):
    return lambda p: np.full(len(np.atleast_2d(p)), float(c))


def example1_spec(eps=0.05, h=0.0125, D=64, tol=1e-8) -> ProblemSpec:
    return ProblemSpec(DomainSpec.ball([0.0, 0.0], 1.0), symmetric_generator(),
                       [constant(-1.0), constant(1.0)], eps=eps, h=h, D=D, tol=tol)


# wall-clock seconds of the session solves, keyed by fixture name
SOLVE_SECONDS: dict[str, float] = {}

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ex1_solution():
    """The full-resolution disk solve (about a minute and a half)."""
    spec = example1_spec()
    t0 = time.perf_counter()
    rep = solve(spec)
    SOLVE_SECONDS["ex1_solution"] = time.perf_counter() - t0
    return spec, rep


@pytest.fixture(scope="session")
def coarse_solution():
    spec = example1_spec(eps=0.2, h=0.05)
    return spec, solve(spec)
