import numpy as np
import pytest

from dgobstacle.mesh import Mesh, build_rect_mesh


@pytest.fixture
def ref_mesh():
    """The reference triangle (0,0), (1,0), (0,1) as a one-element mesh."""
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]),
                np.array([0]), np.array([0]))


@pytest.fixture
def square2():
    return build_rect_mesh(0, 1, 0, 1, 1, 1)


@pytest.fixture
def ex1_mesh():
    return build_rect_mesh(-1.5, 1.5, -1.5, 1.5, 4, 4)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERIA_LINES
    except ImportError:
        return
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA_LINES):
            terminalreporter.write_line(CRITERIA_LINES[n])
