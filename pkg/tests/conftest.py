"""Shared pytest setup: one summary line per acceptance criterion."""

from __future__ import annotations

import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_results: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = _CRITERION.match(item.name)
    if m is None or report.when != "call":
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    _results[int(m.group(1))] = (doc, "PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        doc, verdict, seconds = _results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  ({seconds:.2f}s)  {doc}")
