import pytest

from fiberpnr import ModeProbabilities, build_matrix

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def balanced_modes():
    return ModeProbabilities.balanced(8)


@pytest.fixture(scope="session")
def balanced_matrix(balanced_modes):
    return build_matrix(balanced_modes, 8)


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one status line per acceptance criterion."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
