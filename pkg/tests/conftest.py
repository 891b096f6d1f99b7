import re

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_CRITERIA: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_ac(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    entry = _CRITERIA.setdefault(n, {"name": m.group(2), "ok": True, "seen": False,
                                     "detail": ""})
    if report.when == "call" or report.outcome != "passed":
        entry["seen"] = True
        if report.outcome != "passed":
            entry["ok"] = False
    for key, value in report.user_properties:
        if key == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["ok"] and e["seen"] else "FAIL"
        detail = f"  ({e['detail']})" if e["detail"] else ""
        terminalreporter.write_line(f"AC{n:<2} {status}  {e['name']}{detail}")


@pytest.fixture
def detail(record_property):
    """Attach a short measured value to an acceptance line."""
    def note(text):
        record_property("detail", text)
    return note
