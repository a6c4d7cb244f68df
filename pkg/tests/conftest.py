import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line; the summary is printed after the run."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(line)
