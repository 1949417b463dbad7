import numpy as np
import pytest

from ridge_unlearn.ridge import Dataset


def synthetic(n=50, p=5, d=3, seed=0, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    W = rng.standard_normal((p, d))
    Y = X @ W + noise * rng.standard_normal((n, d))
    return Dataset(X, Y)


@pytest.fixture
def data50():
    return synthetic()


ACCEPTANCE_LINES = []


def record_criterion(label, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
