import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aprank.tensor import Decomposition, SymmetricTensor, num_monomials

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_unit(rng, n, m=None):
    shape = (n,) if m is None else (m, n)
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def random_tensor(rng, n, d):
    return SymmetricTensor(n, d, rng.standard_normal(num_monomials(n, d)))


def random_decomposition(rng, n, d, m):
    return Decomposition(n, d, rng.standard_normal(m), random_unit(rng, n, m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
