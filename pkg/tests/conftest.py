import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from boltzlandau import EvalConfig, SmoothField

settings.register_profile(
    "numeric", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("numeric")


@pytest.fixture
def pair():
    """A non-radial Gaussian pair used across operator tests."""
    g = SmoothField.gaussian({(0, 0, 0): 1.0, (1, 0, 0): 0.3}, width=0.6, center=(0.3, 0.0, -0.2))
    h = SmoothField.gaussian({(0, 0, 0): 1.0, (0, 1, 1): 0.2}, width=0.4, center=(-0.2, 0.1, 0.0))
    return g, h


@pytest.fixture
def coarse():
    """Cheaper rules for tests that only need a few digits."""
    return EvalConfig(n_first=8, n_panel=6, n_polar=6, n_azimuth=12, n_w=6, n_phi=8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
