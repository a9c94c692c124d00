import math

import pytest
from hypothesis import HealthCheck, settings

from deltaflow.directions import make_global_directions
from deltaflow.meshes import quad_grid, split_square, unit_square
from deltaflow.transfer import discretize

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

MU = math.pi / 2

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def square():
    return unit_square(mu=MU)


@pytest.fixture
def square_l4(square):
    return discretize(square, make_global_directions(4), 1.0)


@pytest.fixture
def halves():
    return split_square(mu=MU)


@pytest.fixture
def grid3():
    return quad_grid(3, mu=MU)
