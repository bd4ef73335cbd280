import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL line per acceptance criterion."""
    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            name = getattr(report, "nodeid", "").split("::")[-1]
            if name.startswith("test_criterion_"):
                number = int(name.split("_")[2])
                outcomes[number] = "PASS" if status == "passed" and outcomes.get(number) != "FAIL" else "FAIL"
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in sorted(module.TITLES.items()):
        terminalreporter.write_line(f"criterion {number} ({title}): {outcomes.get(number, 'NOT RUN')}")
