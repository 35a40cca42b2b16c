"""Shared fixtures and the per-criterion acceptance summary."""
from __future__ import annotations

import pytest

from tripletsim.params import SourceParameters

_CRITERIA: dict = {}     # n -> title
_NODE_CRITERION: dict = {}
_RESULTS: dict = {}      # n -> list of (nodeid, passed, note)


@pytest.fixture
def table1() -> SourceParameters:
    return SourceParameters()


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            n, title = mark.args
            _CRITERIA[n] = title
            _NODE_CRITERION[item.nodeid] = n


def pytest_runtest_logreport(report):
    n = _NODE_CRITERION.get(report.nodeid)
    if n is None:
        return
    if report.when == "call" or report.outcome == "failed":
        if hasattr(report, "wasxfail"):
            _RESULTS.setdefault(n, []).append((report.nodeid, False, "expected failure"))
        elif report.outcome != "skipped":
            _RESULTS.setdefault(n, []).append((report.nodeid, report.outcome == "passed", ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _RESULTS.get(n, [])
        if not results:
            tr.write_line(f"SKIP  {n:>2}. {_CRITERIA[n]}")
            continue
        ok = all(passed for _, passed, _ in results)
        failed = [nid.split("::")[-1] + (f" ({note})" if note else "")
                  for nid, passed, note in results if not passed]
        detail = f"  [failing: {', '.join(failed)}]" if failed else ""
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {n:>2}. {_CRITERIA[n]}{detail}")
