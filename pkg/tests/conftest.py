"""Collects acceptance verdicts and prints one line per criterion at the end of the run."""

import pytest

VERDICTS: dict = {}


@pytest.fixture
def verdict():
    """Record ``(ok, detail)`` for a criterion number, then assert it."""
    def record(number: int, title: str, ok: bool, detail: str):
        VERDICTS[number] = (title, bool(ok), detail)
        assert ok, f"criterion {number} ({title}) failed: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        title, ok, detail = VERDICTS[number]
        terminalreporter.write_line(
            f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
