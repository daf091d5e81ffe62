"""Shared fixtures and the acceptance-summary reporter.

Each test in test_acceptance.py carries an ``acceptance(n, label)``
marker; the terminal summary prints one PASS/FAIL line per criterion so
the gate can be read off directly from the pytest output.
"""

from __future__ import annotations

import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(index, label): acceptance-gate criterion"
    )


_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    index = int(marker.args[0])
    label = str(marker.args[1])
    # A criterion backed by several tests (parametrized roofs) passes
    # only if every one of them passed.
    _, earlier = _RESULTS.get(index, (label, "PASS"))
    verdict = "PASS" if report.passed and earlier == "PASS" else "FAIL"
    _RESULTS[index] = (label, verdict)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for index in sorted(_RESULTS):
        label, verdict = _RESULTS[index]
        terminalreporter.write_line(f"criterion {index}: {label} ... {verdict}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
