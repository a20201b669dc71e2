"""Shared pytest wiring.

Collects the acceptance gate verdict lines and echoes them in the run
summary, where captured stdout of passing tests would otherwise hide them.
"""

GATE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not GATE_LINES:
        return
    terminalreporter.section("acceptance gate")
    for line in GATE_LINES:
        terminalreporter.write_line(line)
