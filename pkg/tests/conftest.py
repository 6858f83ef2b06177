import re
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_criteria = {}


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        prev = _criteria.get(n)
        if prev is not None and prev[0] != "PASS":
            status = prev[0]
        names = (prev[1] + ", ") if prev is not None else ""
        # a criterion checked by several tests passes only if all of them do
        _criteria[n] = (status, names + report.nodeid.split("::")[-1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, name = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {name}")
