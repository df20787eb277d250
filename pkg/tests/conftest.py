"""Per-criterion pass/fail summary for tests marked ``criterion(n, title)``."""
from collections import defaultdict

import pytest

_outcomes = defaultdict(list)
_titles = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    _titles[n] = marker.args[1] if len(marker.args) > 1 else ""
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[n].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} - {_titles[n]} ({sum(results)}/{len(results)} checks)")
