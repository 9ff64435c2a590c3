import numpy as np
import pytest

from speedlab import logistic_orbit, orbit_residual, principal_eigen
from speedlab.orbits import growth_potential

from conftest import field

# u*(0) of u' = u(1 + 0.5 sin(2 pi t) - u), frozen from a solve_ivp march to
# the attractor at rtol 1e-12 (the time-periodic logistic oracle)
U_STAR_AT_ZERO = 0.9238518084


def small(expr, nt=200, nx=8):
    return field(expr, nt=nt, nx=nx)


def test_constant_orbit_is_the_ratio():
    orb = logistic_orbit(small("1"), small("0"), small("1"), small("1"))
    np.testing.assert_allclose(orb.snapshots, 1.0, atol=1e-12)
    assert orb.residual <= 1e-10
    assert not orb.extinct


def test_time_periodic_orbit_mean_identity_and_oracle():
    orb = logistic_orbit(small("1"), small("0"), small("1 + 0.5*sin(2*pi*t)"),
                         small("1"))
    # discrete identity: the node mean of c - e*u* telescopes to the closure gap
    assert orb.snapshots[:, 0].mean() == pytest.approx(1.0, abs=5e-8)
    # against the high-accuracy periodic-ODE oracle, first order in dt
    assert orb.snapshots[0, 0] == pytest.approx(U_STAR_AT_ZERO, abs=1e-3)


def test_negative_growth_goes_extinct():
    orb = logistic_orbit(small("1"), small("0"), small("-1"), small("1"))
    assert orb.extinct
    assert orb.lam == pytest.approx(-1.0, abs=1e-10)
    assert np.all(orb.snapshots == 0.0)


def test_residual_flags_perturbed_orbit():
    d, g, c, e = small("1"), small("0"), small("1"), small("1")
    orb = logistic_orbit(d, g, c, e)
    perturbed = type(orb)(snapshots=orb.snapshots + 0.01, omega=orb.omega,
                          ell=orb.ell, extinct=False, residual=0.0,
                          closure_gap=orb.closure_gap,
                          periods_marched=orb.periods_marched, lam=orb.lam)
    assert orbit_residual(perturbed, d, g, c, e) >= 0.005
    with pytest.raises(ValueError):
        extinct = logistic_orbit(d, g, small("-1"), e)
        orbit_residual(extinct, d, g, small("-1"), e)


def test_uniqueness_probe_two_starts_agree():
    d, g = small("1"), small("0")
    c, e = small("1 + 0.5*sin(2*pi*t)"), small("1")
    m_hat = 1.5
    a = logistic_orbit(d, g, c, e, start_value=0.1 * m_hat)
    b = logistic_orbit(d, g, c, e, start_value=10.0 * m_hat)
    assert np.max(np.abs(a.snapshots - b.snapshots)) <= 2e-8


def test_reflection_consistency_for_symmetric_media():
    d = field("1", nx=64)
    g = field("0.2*sin(2*pi*x)", nx=64)   # odd drift
    c = field("1 + 0.3*cos(2*pi*x)", nx=64)
    e = field("1", nx=64)
    orb = logistic_orbit(d, g, c, e)
    reflected = orb.snapshots[:, (-np.arange(64)) % 64]
    assert np.max(np.abs(orb.snapshots - reflected)) <= 1e-9


def test_support_fraction_guard():
    # e positive on a sliver of the cell only
    e = field("abs(x - 0.5) - 0.47", nt=8, nx=64)
    e = type(e)(e.omega, e.ell, np.maximum(e.values, 0.0), None)
    with pytest.raises(ValueError):
        logistic_orbit(field("1", nt=8, nx=64), field("0", nt=8, nx=64),
                       field("1", nt=8, nx=64), e)


def test_orbit_is_exact_discrete_eigenfunction():
    d, g = small("1"), small("0")
    c, e = small("1 + 0.5*sin(2*pi*t)"), small("1")
    orb = logistic_orbit(d, g, c, e)
    lam = principal_eigen(d, g, growth_potential(orb, c, e)).lam
    assert abs(lam) <= 1e-6
