import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import report  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not report.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report.LINES):
        terminalreporter.write_line(report.LINES[n])
