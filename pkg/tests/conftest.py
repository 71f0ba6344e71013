"""Shared fixtures and the acceptance summary printed after the run."""

import pytest

ACCEPTANCE_LINES: list[tuple[str, object, str]] = []


@pytest.fixture
def record():
    """Log one acceptance line; returns ``passed`` so tests can assert on it.

    ``passed=None`` logs an informational line with no verdict.
    """

    def _record(label: str, passed, detail: str = ""):
        ACCEPTANCE_LINES.append((label, None if passed is None else bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_LINES:
        verdict = "INFO" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{verdict}  {label}  {detail}".rstrip())
