import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
