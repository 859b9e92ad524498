"""Shared fixtures and the acceptance-criterion reporting hook.

Tests marked ``@pytest.mark.criterion(n, "label")`` get a one-line
``CRITERION n: PASS/FAIL`` verdict in the terminal summary so the
acceptance status is readable at a glance.
"""
from __future__ import annotations

import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(num, label): tag a test as one numbered acceptance criterion",
    )


_CRITERION_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num = marker.args[0]
    label = marker.args[1] if len(marker.args) > 1 else item.name
    if report.when == "call":
        verdict = "PASS" if report.passed else "FAIL"
        _CRITERION_RESULTS[num] = (verdict, label)
    elif report.when == "setup" and not report.passed:
        _CRITERION_RESULTS[num] = ("FAIL", label + " (setup error)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_RESULTS:
        return
    tw = terminalreporter
    tw.section("acceptance criteria")
    for num in sorted(_CRITERION_RESULTS):
        verdict, label = _CRITERION_RESULTS[num]
        markup = {"green": True} if verdict == "PASS" else {"red": True}
        tw.write_line(f"CRITERION {num}: {verdict} — {label}", **markup)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
