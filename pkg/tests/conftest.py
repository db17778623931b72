import pytest

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criterion_report():
    """Collect one human-readable pass/fail line per acceptance criterion."""

    def record(line):
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
