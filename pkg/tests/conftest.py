import pytest

VERDICTS = {}


@pytest.fixture
def verdict():
    """Record an acceptance verdict; returns ``ok`` so callers can assert it."""
    def record(number, ok, detail):
        VERDICTS[number] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        ok, detail = VERDICTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}")
