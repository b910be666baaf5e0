"""Pytest wiring shared by the test modules.

The acceptance module appends one formatted line per criterion to
``ACCEPTANCE_LINES``; the hook below replays them after the run so the
verdicts stay visible even when stdout capture is active.
"""

from typing import List

ACCEPTANCE_LINES: List[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
