import re

import pytest

_CRITERIA: dict[int, dict] = {}
_NAME = re.compile(r"test_criterion_(\d+)_")


@pytest.fixture
def criterion_detail(request):
    """Dict whose contents are printed next to the criterion's verdict."""
    m = _NAME.search(request.node.name)
    entry = _CRITERIA.setdefault(int(m.group(1)), {"outcome": None, "detail": {}})
    return entry["detail"]


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if not m:
        return
    entry = _CRITERIA.setdefault(int(m.group(1)), {"outcome": None, "detail": {}})
    if report.when == "call" or report.outcome != "passed":
        if entry["outcome"] != "FAIL":
            entry["outcome"] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        entry = _CRITERIA[k]
        detail = ", ".join(f"{key}={val}" for key, val in entry["detail"].items())
        line = f"CRITERION {k}: {entry['outcome'] or 'NOT RUN'}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
