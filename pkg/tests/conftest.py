import os

import pytest
from hypothesis import HealthCheck, settings

from taperscat.geometry import shape_registry
from taperscat.synthesis import MeasurementConfig, synthesize

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def circle_small():
    """Unit circle at k = 25, 16 beams, 256 receivers, 5% noise."""
    cfg = MeasurementConfig(R=5.0, N_R=256, N_d=16, k=25.0, g=0.01, noise_delta=0.05, seed=1)
    return synthesize(shape_registry("circle"), cfg, shape="circle")


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def report(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
