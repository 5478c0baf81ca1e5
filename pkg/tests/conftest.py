import pytest

_outcomes: dict[int, dict] = {}


@pytest.fixture
def record(request):
    """Attach ``key=value`` measurements to the criterion summary line."""

    def _record(key, value):
        text = f"{value:.4g}" if isinstance(value, float) else str(value)
        request.node.user_properties.append((key, text))

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, name = marker.args
    entry = _outcomes.setdefault(number, {"name": name, "passed": True, "seconds": 0.0})
    entry["passed"] &= report.passed
    entry["seconds"] += report.duration
    entry["details"] = ", ".join(f"{k}={v}" for k, v in item.user_properties)
    if report.failed and call.excinfo is not None:
        entry["reason"] = call.excinfo.exconly().splitlines()[0][:160]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        e = _outcomes[number]
        status = "PASS" if e["passed"] else "FAIL"
        line = f"criterion {number}: {status}  {e['name']} ({e['seconds']:.1f}s)"
        if e.get("details"):
            line += f"  [{e['details']}]"
        terminalreporter.write_line(line)
        if not e["passed"] and e.get("reason"):
            terminalreporter.write_line(f"    {e['reason']}")
