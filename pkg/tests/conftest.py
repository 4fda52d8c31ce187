"""Shared fixtures and the per-criterion acceptance report."""

from __future__ import annotations

from collections import defaultdict

import pytest

from tensorrvea import tensor_ops as T

CRITERIA = {
    1: "selection oracle equivalence",
    2: "operator oracle equivalence",
    3: "operator invariants (10^4 instances)",
    4: "DTLZ correctness",
    5: "DTLZ2 convergence vs pinned baseline",
    6: "metric correctness",
    7: "tensor vs scalar speedup",
    8: "neuroevolution HV",
    9: "operator extensibility",
    10: "CLI determinism",
}

_outcomes: dict[int, list[str]] = defaultdict(list)


@pytest.fixture(autouse=True)
def _single_lane():
    # tests that vary the lane count set it explicitly
    with T.lanes(1):
        yield


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[int(marker.args[0])].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        results = _outcomes.get(number)
        if not results:
            status = "NOT RUN"
        elif all(r == "passed" for r in results):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {number:>2} {title:<40} {status}")
