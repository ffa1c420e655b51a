import numpy as np
import pytest

from limitexec.hamiltonian import QuoteContext
from limitexec.intensity import ExponentialIntensity, figure1_tilde
from limitexec.value_solver import LiquidationProblem, compute_quote_surface, solve_theta

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def exp_model():
    return ExponentialIntensity(0.1, 0.3)


@pytest.fixture(scope="session")
def tilde_model():
    return figure1_tilde()


@pytest.fixture(scope="session")
def fig2_problem():
    return LiquidationProblem(400, 50, 300, mu=0.0, sigma=0.3, gamma=0.001, penalty=3.0)


@pytest.fixture(scope="session")
def fig2_ctx(exp_model):
    return QuoteContext(0.001, 50, exp_model)


@pytest.fixture(scope="session")
def fig2_solution(fig2_problem, exp_model, fig2_ctx):
    grid = solve_theta(fig2_problem, exp_model, dt=0.01)
    return grid, compute_quote_surface(grid, fig2_ctx)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
