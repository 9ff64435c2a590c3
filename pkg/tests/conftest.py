import numpy as np
import pytest

from speedlab import SystemSpec, build_field


def field(expr, omega=1.0, ell=1.0, nt=200, nx=64):
    return build_field(expr, omega, ell, nt, nx)


def make_system(nt=200, nx=64, **overrides):
    """Constants competition instance; override individual expressions."""
    exprs = {"d1": "1", "d2": "0.5", "g1": "0", "g2": "0", "b1": "2", "b2": "1",
             "a11": "1", "a12": "0.3", "a21": "1.2", "a22": "1"}
    exprs.update(overrides)
    return SystemSpec.from_expressions(exprs, 1.0, 1.0, nt, nx)


@pytest.fixture(scope="session")
def constants_system():
    """The drift-free constants instance used across the determinacy tests."""
    return make_system()


@pytest.fixture(scope="session")
def fisher_system():
    """Decoupled constants instance: two independent logistic species."""
    return make_system(b1="1", d2="1", a12="0", a21="0")


@pytest.fixture(scope="session")
def periodic_b2_system():
    """x-independent instance with a time-periodic species-2 growth, mean 1."""
    return make_system(nx=8, b2="1 + 0.5*sin(2*pi*t)")


def rng(seed=0):
    return np.random.default_rng(seed)
