"""Shared pytest wiring for the suite.

The only machinery here is the ``acceptance`` marker: tests tagged with
``@pytest.mark.acceptance(num, "description")`` get one PASS/FAIL verdict
line each in the terminal summary, so a plain ``pytest`` run ends with a
compact scoreboard of the headline guarantees.
"""

import pytest

_VERDICTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, description): headline guarantee with a summary verdict line",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num, description = marker.args
    _VERDICTS[num] = (report.passed, description)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance verdicts")
    for num in sorted(_VERDICTS):
        passed, description = _VERDICTS[num]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {num:02d} {verdict} — {description}")
