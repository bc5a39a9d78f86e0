import numpy as np
import pytest

from srsp.ensemble import geometric_weights, random_ensemble
from srsp.spectral import DomainSpec


@pytest.fixture
def unit1d():
    return DomainSpec((1.0,), (16,), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def baseline_small():
    """Coupled 1-D ensemble small enough for per-test integration."""
    dom = DomainSpec((1.0,), (32,), 2)
    return random_ensemble(dom, 4, m=1.0, weights=geometric_weights(4, 0.5), seed=3)


def random_coeffs(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.REPORT:
            terminalreporter.write_line(line)
