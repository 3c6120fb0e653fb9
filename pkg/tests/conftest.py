import numpy as np
import pytest

from pgkit.diagnostics import LinearGaussianModel, kalman_filter_smoother
from pgkit.model import BenchmarkModel, NoiseParams, RngStream, simulate

ACCEPTANCE_LINES = []


def record_criterion(label: str, passed: bool, detail: str) -> None:
    """Queue one pass/fail line for the end-of-run acceptance report."""
    line = f"{label}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def benchmark_model():
    return BenchmarkModel()


@pytest.fixture(scope="session")
def true_theta():
    return NoiseParams(0.1, 1.0)


@pytest.fixture(scope="session")
def benchmark_data(benchmark_model, true_theta):
    """The fixed T=500 benchmark dataset shared across tests."""
    return simulate(benchmark_model, true_theta, 500, RngStream(20240101))


@pytest.fixture(scope="session")
def short_benchmark_data(benchmark_model, true_theta):
    return simulate(benchmark_model, true_theta, 100, RngStream(20240101))


@pytest.fixture(scope="session")
def lg_model():
    return LinearGaussianModel(a=0.8, c=1.0, q=0.5, r=1.0, m0=0.0, p0=1.0)


@pytest.fixture(scope="session")
def lg_data(lg_model):
    return simulate(lg_model.ssm(), lg_model.params(), 50, RngStream(7))


@pytest.fixture(scope="session")
def lg_oracle(lg_model, lg_data):
    return kalman_filter_smoother(lg_model, lg_data[1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
