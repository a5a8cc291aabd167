import pytest

from pgue import painleve


@pytest.fixture(scope="session")
def traj11():
    """Pole-free solution for m = 1, tau = (1, 1) on [-4, 30]."""
    return painleve.solve_pole_free((1.0, 1.0), -4.0, 30.0)


# PASS/FAIL lines from the acceptance criteria, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
