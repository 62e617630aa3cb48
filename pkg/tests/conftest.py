"""Suite-wide reporting: one verdict line per acceptance criterion.

The criterion tests live in test_acceptance.py and are named
test_criterion_<n>_*; their pass/fail outcomes are collected here and
echoed as a compact block at the end of the run.
"""

import re

import pytest

CRITERIA = {
    1: "constructed synthesis networks match direct summation to 1e-10",
    2: "depth/channel/weight audits of the stacked synthesis architecture",
    3: "truncation error under the analytic ceiling with pinned decay slopes",
    4: "decoded series is 1-Lipschitz from coefficient l1 to sup norm",
    5: "fold is smooth at the junctions and exact at dyadic nodes",
    6: "backpropagation matches central differences on study architectures",
    7: "trained surrogates improve at the pinned per-level ratios",
    8: "excitable-medium solver: fixed point, spatial order, front trend",
    9: "validate CLI is byte-deterministic for untrained quantities",
}

_outcomes = {}
_PATTERN = re.compile(r"test_criterion_(\d+)")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _PATTERN.search(item.name)
    if match and report.when == "call":
        _outcomes[int(match.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        outcome = _outcomes.get(number)
        if outcome is None:
            continue
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome,
                                                           outcome.upper())
        terminalreporter.write_line(
            f"[{verdict}] criterion {number}: {CRITERIA[number]}")
