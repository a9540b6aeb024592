import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; the line is printed in the terminal summary."""
    def _report(number, ok, detail, seconds):
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append((number, f"{status}  criterion {number:2d}  [{seconds:7.1f} s]  {detail}"))
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
