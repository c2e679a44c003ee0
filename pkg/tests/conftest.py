import pytest

_LINES = {}


@pytest.fixture
def report():
    """Collects a criterion line for the end-of-run summary."""
    def add(outcome):
        _LINES[outcome.number] = outcome.line()
        print(outcome.line())
        return outcome
    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
