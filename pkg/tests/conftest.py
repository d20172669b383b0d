"""Shared pytest hooks.

Acceptance tests register one verdict line each; the lines are echoed in the
terminal summary so a plain ``pytest`` run shows them.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
