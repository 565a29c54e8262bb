from __future__ import annotations

import pytest

from seekloop.media import SyntheticFrameProvider
from seekloop.model import ToolConfig

from helpers import build_tiny_world

_RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion covered by this test")
    config.stash[_RESULTS_KEY] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    results = item.config.stash[_RESULTS_KEY]
    key = (marker.args[0], marker.args[1])
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        prev = results.get(key)
        # a criterion split over several tests passes only if all of them pass
        if prev is None or prev == "PASS" or status == "FAIL":
            results[key] = status if prev != "FAIL" else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), status in sorted(results.items()):
        terminalreporter.write_line(f"criterion {number:>2} {status}: {title}")


@pytest.fixture
def cfg4() -> ToolConfig:
    return ToolConfig(4)


@pytest.fixture
def synthetic_provider() -> SyntheticFrameProvider:
    return SyntheticFrameProvider()


@pytest.fixture
def tiny_world():
    return build_tiny_world()
