import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

REPO = Path(__file__).resolve().parent.parent
TOY = REPO / "toy"

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def toy_dir():
    return TOY


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    label = f"{marker.args[0]:>2}. {marker.args[1]}"
    passed = report.passed and _ACCEPTANCE.get(label, "PASS") == "PASS"
    _ACCEPTANCE[label] = "PASS" if passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split(".")[0])):
        terminalreporter.write_line(f"{_ACCEPTANCE[label]}  criterion {label}")
