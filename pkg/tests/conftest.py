import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Record one pass/fail line for the acceptance summary."""

    def record(number, label, passed, detail):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {label}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
