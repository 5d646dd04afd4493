import numpy as np
import pytest

from grushin.grid import TensorGrid
from grushin.model import ProblemSpec, benchmark_spec
from grushin.operator import GrushinOperator

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Print one pass/fail line per acceptance criterion and keep it for the summary."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_spec():
    return benchmark_spec(mu=0.05)


@pytest.fixture(scope="session")
def small_op(small_spec):
    grid = TensorGrid.from_spec(small_spec, 33)
    return GrushinOperator(grid, small_spec.lam)


@pytest.fixture(scope="session")
def critical_spec():
    return ProblemSpec(regime="critical", s=None, r=0.5, mu=0.01, box=((-1.0, 1.0), (-0.5, 0.5)),
                       ball_center=(0.6, 0.0), ball_radius=0.15)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
