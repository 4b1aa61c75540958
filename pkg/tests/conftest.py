import pytest

from pulsefront import nonlinearity as nl
from pulsefront.front_solver import solve_front
from pulsefront.pde_core import Grid1D

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        # one line per criterion, in criterion order
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid():
    return Grid1D.from_spacing()


@pytest.fixture(scope="session")
def cubic():
    return nl.autonomous(nl.cubic(0.3))


@pytest.fixture(scope="session")
def cubic_front(cubic, grid):
    return solve_front(cubic, 0.3, grid)
