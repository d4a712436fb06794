import pytest

CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record a numbered acceptance result, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        CRITERIA[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
