import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# lines collected by the acceptance suite, printed once at the end of the run
ACCEPTANCE_LINES: list = []


def decaying_series(rng, n, lead=1.0):
    """Random coefficients decaying like 1/(k+1)^2; keeps reciprocals tame."""
    a = rng.uniform(-1.0, 1.0, n) / (np.arange(n) + 1.0) ** 2
    a[0] = lead
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
