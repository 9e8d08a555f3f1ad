
_criteria = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            _criteria.append((value, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for title, outcome in _criteria:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'} {title}")
