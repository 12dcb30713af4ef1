import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one acceptance criterion: prints a PASS/FAIL line and asserts."""

    def record(number, title, ok, detail, elapsed, limit):
        in_time = elapsed < limit
        passed = bool(ok) and in_time
        line = (f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail} "
                f"[{elapsed:.1f}s, limit {limit:g}s]")
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert ok, line
        assert in_time, f"{line} (over the runtime limit)"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
