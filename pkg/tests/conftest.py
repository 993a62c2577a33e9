import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sweepflow.dynamics import constant_drift
from sweepflow.geometry import Ball, Halfspace, MovingConvexSet

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def half_line():
    """S = [0, inf), f = -1, horizon 1.5."""
    return constant_drift([-1.0], 1.0), MovingConvexSet.static(Halfspace([-1.0], 0.0), 1.5)


@pytest.fixture
def unit_disc():
    """Unit disc, f = (1, 0), horizon 3."""
    return constant_drift([1.0, 0.0], 1.0), MovingConvexSet.static(Ball([0.0, 0.0], 1.0), 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
