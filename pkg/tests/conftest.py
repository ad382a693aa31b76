import math

import pytest

from orbitlab.dynamics import CartesianState, Params
from orbitlab.integrator import StepControl, integrate_cartesian


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    # first call compiles (or loads) the kernel; keep that out of timed tests
    integrate_cartesian(CartesianState(0.0, (1.0, 0.0), (0.0, 1.0)), Params(0.1, 1.0),
                        t_end=0.1)
    integrate_cartesian(CartesianState(0.0, (1.0, 0.0), (0.0, 1.0)),
                        Params(0.1, 1.0, alpha=0.1), t_end=0.1, model="tired")


@pytest.fixture(scope="session")
def unit_start():
    return CartesianState(0.0, (1.0, 0.0), (0.0, 1.0))


@pytest.fixture(scope="session")
def spiral_run(unit_start):
    """delta=0.1, c=1 from (1,0),(0,1) to t=20 at rtol 1e-10."""
    return integrate_cartesian(unit_start, Params(0.1, 1.0), StepControl(rtol=1e-10), t_end=20.0)


@pytest.fixture(scope="session")
def circle_run(unit_start):
    return integrate_cartesian(unit_start, Params(0.0, 1.0), StepControl(rtol=1e-10),
                               t_end=2 * math.pi)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def criterion_log():
    """Record one verdict line per acceptance criterion; echoed in the terminal summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
