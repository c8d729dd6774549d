import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from capx.channel import ScalarChannel
from capx.config import PowerGrid
from capx.solver import SolverConfig, sweep_capacity_curve

settings.register_profile("capx", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("capx")


@pytest.fixture(scope="session")
def tanh_ch():
    return ScalarChannel.tanh(10.0, 1.0)


@pytest.fixture(scope="session")
def awgn_ch():
    return ScalarChannel.awgn(1.0)


# capacity sweep over the default power range at 4 points per decade, with two
# fresh restarts per point besides the warm starts from the previous achiever
SWEEP_POWERS = PowerGrid(0.1, 1e5, 4).powers()
SWEEP_SOLVER = SolverConfig(restarts=2)


@pytest.fixture(scope="session")
def capacity_sweep(tanh_ch):
    return sweep_capacity_curve(tanh_ch, SWEEP_POWERS, cfg=SWEEP_SOLVER)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = {}


@pytest.fixture
def record_criterion():
    """Store one pass/fail line per acceptance criterion for the run summary."""

    def record(key, passed, detail):
        line = f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[key] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split("-")[0]), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
