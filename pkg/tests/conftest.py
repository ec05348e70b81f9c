import pytest

from pogit.design import Design, Intercept, Linear
from pogit.model import PogitSpec


@pytest.fixture
def two_cov_spec():
    return PogitSpec(Design([Linear("x_lambda")]), Design([Linear("x_p")]))


@pytest.fixture
def intercept_spec():
    """lambda: intercept + x_lambda, p: intercept + x_p."""
    return PogitSpec(Design([Intercept(), Linear("x_lambda")]), Design([Intercept(), Linear("x_p")]))




def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.rstrip("abc")), k)):
        terminalreporter.write_line(RESULTS[key])
