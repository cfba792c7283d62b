import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lbvh_rsi import fixtures  # noqa: E402


@pytest.fixture
def simple():
    return fixtures.simple_scene()


@pytest.fixture
def canopy():
    return fixtures.canopy_scene()


# one PASS/FAIL line per acceptance criterion at the end of the run
_titles = {}
_outcomes = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _titles[item.nodeid] = (m.args[0], m.args[1])


def pytest_runtest_logreport(report):
    if report.nodeid not in _titles:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(report.nodeid, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (num, title) in sorted(_titles.items(), key=lambda kv: kv[1][0]):
        if nodeid in _outcomes:
            verdict = "PASS" if _outcomes[nodeid] == "passed" else "FAIL"
            terminalreporter.write_line(f"{verdict}  criterion {num:>2}: {title}")
