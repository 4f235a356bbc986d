import math

import numpy as np
import pytest

from gpssm import GpSsmModel, Kernel, TrainingSet, build_grid, fit, solve_equilibrium, train
from gpssm import systems

CUBIC_SEED = 0
VDP_SEED = 0

_ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and return ``ok``."""

    def emit(criterion: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


@pytest.fixture(scope="session")
def cubic_data():
    return systems.generate_cubic_dataset(seed=CUBIC_SEED)


@pytest.fixture(scope="session")
def cubic_model(cubic_data):
    return train(cubic_data, "squared-exponential")


@pytest.fixture(scope="session")
def cubic_solution(cubic_model):
    return solve_equilibrium(cubic_model, build_grid((-12.0, 8.0), 150))


@pytest.fixture(scope="session")
def vdp_model():
    return train(systems.generate_vdp_dataset(seed=VDP_SEED), "squared-exponential")


def random_se_model(rng: np.random.Generator, n: int, m: int) -> GpSsmModel:
    """SE model with random hyperparameters on random data (no optimization)."""
    X = rng.uniform(-3, 3, (m, n))
    Y = np.tanh(X @ rng.normal(size=(n, n))) * rng.uniform(0.5, 3) + 0.1 * rng.standard_normal((m, n))
    kernels = [Kernel.squared_exponential(rng.uniform(0.3, 3), rng.uniform(0.3, 3)) for _ in range(n)]
    return fit(kernels, TrainingSet(X, Y, rng.uniform(0.01, 0.5, n)))


@pytest.fixture(scope="session")
def small_se_models():
    rng = np.random.default_rng(7)
    return [random_se_model(rng, n, m) for n, m in [(1, 5), (1, 30), (2, 12), (3, 40)]]


def resolved_1d_instance(rng: np.random.Generator, q_max: int = 60, per_sd: float = 1.6):
    """A small 1-D SE model and a grid that resolves its transition density.

    Returns ``None`` when resolving the narrowest predictive density would
    need more than ``q_max`` subdivisions; callers draw again.
    """
    m = int(rng.integers(3, 9))
    X = np.linspace(-3, 3, m)[:, None]
    a, b = rng.uniform(-0.6, 0.6), rng.uniform(-1, 1)
    sn = rng.uniform(0.7, 1.5)
    Y = a * X + b * np.sin(X) + sn * rng.standard_normal(X.shape)
    model = fit(Kernel.squared_exponential(rng.uniform(1, 2), rng.uniform(1, 3)), TrainingSet(X, Y, sn))
    mu, var = model.moments(np.linspace(-40, 40, 4001)[:, None])
    half = float(np.abs(mu).max() + 8 * np.sqrt(var.max()))
    if math.ceil(2 * half * per_sd / np.sqrt(var.min())) > q_max:
        return None
    return model, build_grid((-half, half), q_max)
