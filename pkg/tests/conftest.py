import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from boxmom.geometry import Region

settings.register_profile("boxmom", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("boxmom")

PENTAGON = [(math.cos(2 * math.pi * i / 5 + 0.3) + 1.2, math.sin(2 * math.pi * i / 5 + 0.3) + 1.1)
            for i in range(5)]
L_SHAPE = [(0, 0), (3, 0), (3, 1), (2, 1), (2, 2), (0, 2)]

# acceptance verdicts collected for the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rect():
    return Region.rectangle(2.0, 1.0)


@pytest.fixture
def pentagon():
    return Region.convex_polygon(PENTAGON, region_id="pentagon")


@pytest.fixture
def lshape():
    return Region.polygon(L_SHAPE, region_id="lshape")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
