import pytest

from gfurllc import baseline

# filled by test_acceptance; printed after the run so the lines survive capture
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def cfg():
    return baseline()


@pytest.fixture(scope="session")
def cfg10():
    return baseline(gamma_th_db=-10.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
