import numpy as np
import pytest

from speedlab import lambda_diagnostics, lambda_of_mu, principal_eigen
from speedlab.eigen import refined_lambda
from speedlab.errors import NonEllipticError

from conftest import field

# continuum principal eigenvalue of psi'' + cos(2 pi x) psi = lambda psi on
# the periodic unit cell, frozen from a Fourier spectral eigensolve (65 modes,
# agrees with a 4096-node finite-difference solve to 2.4e-9)
LAMBDA_COS_CONTINUUM = 0.012661594814


def test_constant_coefficients_exact():
    r = principal_eigen(field("1"), field("0"), field("2"))
    assert r.lam == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(r.eigenfunction, 1.0, atol=1e-9)


def test_x_independent_reduces_to_time_average():
    r = principal_eigen(field("1"), field("0"), field("1 + 0.5*sin(2*pi*t)"))
    assert r.lam == pytest.approx(1.0, abs=1e-12)


def test_cos_potential_positive_gap_and_continuum_value():
    d, g, h = field("1"), field("0"), field("cos(2*pi*x)")
    base = principal_eigen(d, g, h)
    # spatial structure lifts the eigenvalue strictly above the plain average
    assert base.lam > 0.0

    def build(factor):
        return principal_eigen(field("1", nt=200 * factor, nx=64 * factor),
                               field("0", nt=200 * factor, nx=64 * factor),
                               field("cos(2*pi*x)", nt=200 * factor, nx=64 * factor))

    extrapolated, res_base, res_fine, estimate = refined_lambda(build)
    assert extrapolated == pytest.approx(LAMBDA_COS_CONTINUUM, abs=2e-5)
    # Cauchy property: the reported estimate bounds the base-grid error
    assert abs(res_base.lam - LAMBDA_COS_CONTINUUM) <= 1.5 * estimate


def test_residual_contract_and_positivity():
    r = principal_eigen(field("0.7"), field("0.4*sin(2*pi*x)"),
                        field("cos(2*pi*x) + 0.3*sin(2*pi*t)"))
    assert r.residual <= 1e-8
    assert r.eigenfunction.min() > 0.0
    assert r.eigenfunction.max() == pytest.approx(1.0)


def test_potential_shift_identity_exact():
    d, g = field("1"), field("0.2*sin(2*pi*x)")
    m = field("cos(2*pi*x)")
    base = principal_eigen(d, g, m).lam
    shifted = principal_eigen(d, g, m + 3.25).lam
    assert shifted - base == pytest.approx(3.25, abs=1e-10)


@pytest.mark.parametrize("d,g,m,mu,expected", [
    ("1", "0", "1", 1.0, 2.0),
    ("2", "1", "0", 0.5, 1.0),
])
def test_tilted_constants(d, g, m, mu, expected):
    r = lambda_of_mu(field(d), field(g), field(m), mu)
    assert r.lam == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("mu", [0.3, 1.0])
def test_evenness_for_symmetric_media(mu):
    d = field("1 + 0.2*cos(2*pi*x)")
    g = field("0.2*sin(2*pi*x)")  # odd drift
    m = field("cos(2*pi*x)")
    plus = lambda_of_mu(d, g, m, mu).lam
    minus = lambda_of_mu(d, g, m, -mu).lam
    assert abs(plus - minus) <= 1e-8


def test_diagnostics_constant_parabola():
    grid = np.array([-1.0, 0.0, 1.0])
    rep = lambda_diagnostics(field("1", nx=8), field("0", nx=8), field("1", nx=8), grid)
    assert rep.convexity_ok
    np.testing.assert_allclose(rep.lambdas, grid**2 + 1.0, atol=1e-9)
    assert rep.evenness_checked and rep.evenness_ok


def test_diagnostics_potential_bump_is_exact_shift():
    grid = np.linspace(-2.0, 2.0, 9)
    m2 = field("cos(2*pi*x)")
    m1 = m2 + 1.0
    rep = lambda_diagnostics(field("1"), field("0"), m1, grid, m2=m2)
    assert rep.monotone_ok
    assert rep.monotone_margin == pytest.approx(1.0, abs=1e-10)


def test_diagnostics_asymmetric_drift_skips_evenness():
    grid = np.linspace(-2.0, 2.0, 9)
    rep = lambda_diagnostics(field("1", nx=8), field("1", nx=8), field("0", nx=8), grid)
    assert not rep.evenness_checked and rep.evenness_ok is None
    assert rep.convexity_ok
    np.testing.assert_allclose(rep.lambdas, grid**2 + grid, atol=1e-9)


def test_grid_mismatch_and_ellipticity_guards():
    with pytest.raises(ValueError):
        principal_eigen(field("1", nx=8), field("0", nx=16), field("0", nx=8))
    with pytest.raises(NonEllipticError):
        principal_eigen(field("0.0001 - x*0.001"), field("0"), field("0"))


def test_large_tilt_does_not_overflow():
    r = lambda_of_mu(field("1", nx=16), field("0", nx=16), field("1", nx=16), 20.0)
    assert r.lam == pytest.approx(401.0, rel=1e-10)
