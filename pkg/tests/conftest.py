"""Shared test reporting: acceptance criteria append their pass/fail
lines here and the terminal summary echoes them after the run."""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
