from importlib import resources

import pytest
from hypothesis import settings

from klaimnet.dsl import parse_net

# Ordinary runs use 100 cases per property; the acceptance suite asks for 1000.
settings.register_profile("klaimnet", max_examples=100, deadline=None)
settings.load_profile("klaimnet")

SCENARIOS = resources.files("klaimnet") / "scenarios"


def scenario_path(name: str) -> str:
    return str(SCENARIOS / f"{name}.klaim")


def load(name: str, extensions=()):
    return parse_net((SCENARIOS / f"{name}.klaim").read_text(), extensions=extensions, filename=f"{name}.klaim")


def net(text: str, extensions=()):
    return parse_net(text, extensions=extensions).state


@pytest.fixture
def scenario():
    return load


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")
    config._criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        item.config._criteria.append((marker.args[0], marker.args[1], report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = sorted(config._criteria)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in rows:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {title}")
