import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lsam", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lsam")

_CRITERIA_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line criterion outcome; echoed in the terminal summary."""
    def _add(line: str):
        print(line)
        _CRITERIA_LINES.append(line)
    return _add


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
