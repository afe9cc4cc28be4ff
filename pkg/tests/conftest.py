import numpy as np
import pytest

from obstaclelab import GridSpec, SpaceTimeField


@pytest.fixture
def field_of():
    """Build an analytic SpaceTimeField from fn(X, t) on a GridSpec."""

    def make(spec: GridSpec, fn, name="u"):
        return SpaceTimeField.from_function(spec, fn, name=name)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
