import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from asind.dynamics import DynamicsSpec, integrate_rk4  # noqa: E402
from asind.netgen import AdjacencyMatrix  # noqa: E402


@pytest.fixture
def sis_pair():
    """Two mutually coupled SIS nodes, 200 exact samples."""
    spec = DynamicsSpec("sis", 2, delta=0.5, gamma=0.2)
    a = AdjacencyMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    traj = integrate_rk4(spec, a, np.array([0.3, 0.7]), 0.01, 199)
    return spec, a, traj


_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[k])
