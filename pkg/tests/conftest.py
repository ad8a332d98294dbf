"""Echo one PASS/FAIL line per acceptance criterion in the terminal summary,
so the lines survive output capture in plain `pytest` runs."""

_criterion_outcomes = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::test_criterion_")[-1]
    number, _, rest = name.partition("_")
    label = rest.replace("_", " ")
    outcome = "PASS" if report.passed else "FAIL"
    _criterion_outcomes.append((int(number), label, outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number, label, outcome in sorted(_criterion_outcomes):
        terminalreporter.write_line(f"ACCEPTANCE {number:2d} {label}: {outcome}")
