import numpy as np
import pytest

from aetc import CostSchedule, SyntheticLinearSpec

# Lines appended by the acceptance tests and echoed in the terminal summary.
ACCEPTANCE_LINES = []


def four_model_spec(seed=None):
    """Four regressors in two correlated pairs; only the first pair drives the response."""
    cov = np.array([[1.0, 0.6, 0.0, 0.0],
                    [0.6, 1.0, 0.0, 0.0],
                    [0.0, 0.0, 1.0, 0.3],
                    [0.0, 0.0, 0.3, 1.0]])
    return SyntheticLinearSpec(meanX=[1.0, 2.0, 0.5, -1.0], covX=cov, beta=[1.0, 2.0, 0.5, 0.0, 0.0],
                               noiseCov=0.05, costs=CostSchedule(100.0, (5.0, 1.0, 1.0, 1.0)), seed=seed)


def vector_spec(k0=3):
    rng = np.random.default_rng(11)
    A = rng.standard_normal((3, 3))
    cov = A @ A.T + 0.5 * np.eye(3)
    beta = rng.standard_normal((k0, 4))
    N = rng.standard_normal((k0, k0))
    return SyntheticLinearSpec(meanX=[0.5, -1.0, 2.0], covX=cov, beta=beta,
                               noiseCov=0.1 * (N @ N.T) + 0.05 * np.eye(k0),
                               costs=CostSchedule(50.0, (1.0, 2.0, 4.0)))


@pytest.fixture
def spec4():
    return four_model_spec()


@pytest.fixture
def vspec():
    return vector_spec()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
