import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
