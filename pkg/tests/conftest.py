import re

_CRITERIA = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
        if not m:
            return
        detail = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        status = report.outcome.upper()
        _CRITERIA.append((int(m.group(1)), m.group(2), status, report.duration, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, status, duration, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {num:2d} {name:<28s} {status:<7s} {duration:7.1f}s  {detail}")
