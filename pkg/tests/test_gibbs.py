"""
Test suite for Gibbs-measure quadrature: tilted measures, moments of
nu_N, the Curie-Weiss effective potential and stationary quantities.
"""
import numpy as np
import pytest

from src.mflab_critical_points import critical_temperature
from src.mflab_gibbs import (QuadratureError, curie_weiss_effective_potential, gibbs_barycenter_variance, nu_moments,
                             nu_log_partition, quadrature_grid, stationary_entropy_curie_weiss, tilted_measure)
from src.mflab_potentials import curie_weiss, curie_weiss_site, named_1d, potential_1d

QUARTIC_RATIO = 0.337989120  # Gamma(3/4) / Gamma(1/4)


def test_gaussian_tilt_closed_form():
    """Test logZ, mean and variance of a tilted standard Gaussian."""
    mu = tilted_measure(named_1d("quadratic"), 0.7)
    assert mu.logZ == pytest.approx(0.5 * np.log(2 * np.pi) + 0.245, abs=1e-10)
    assert mu.mean == pytest.approx(0.7, abs=1e-10)
    assert mu.variance == pytest.approx(1.0, abs=1e-10)
    assert mu.density().mass() == pytest.approx(1.0, abs=1e-10)


def test_curie_weiss_tilt_symmetry(curie_weiss_hot):
    """Test that the untilted Curie-Weiss site law is centered."""
    mu = tilted_measure(potential_1d(curie_weiss_hot), 0.0)
    assert mu.mean == pytest.approx(0.0, abs=1e-12)


def test_critical_curie_weiss_variance():
    """Test kappa Var = 1 near sigma^2 = 0.46."""
    spec = curie_weiss(0.46, 1.0)
    mu = tilted_measure(potential_1d(spec), 0.0)
    assert spec.kappa * mu.variance == pytest.approx(1.0, abs=2e-2)


def test_quadrature_rejects_flat_tails():
    """Test that a non-integrable log density is a quadrature error."""
    with pytest.raises(QuadratureError):
        quadrature_grid(lambda x: np.zeros_like(x), (-1.0, 1.0))


def test_gaussian_nu_moments():
    """Test that the second moment of exp(-N x^2/2) is 1/N."""
    for N in (10, 1000):
        assert nu_moments(named_1d("quadratic"), N, (2,), center=0.0)[2] == pytest.approx(1.0 / N, abs=1e-10)


def test_quartic_nu_moments_scaling():
    """Test the N^{-1/2} law of the second moment under exp(-N x^4)."""
    for N in (100, 10000):
        m2 = nu_moments(named_1d("quartic"), N, (2,), center=0.0)[2]
        assert m2 * np.sqrt(N) == pytest.approx(QUARTIC_RATIO, rel=1e-6)


def test_effective_potential_tabulation():
    """Test that omega is even, minimal at 0 and consistent with its derivative."""
    omega = curie_weiss_effective_potential(1.0, 1.0)
    table = omega.tabulate(np.linspace(-1.0, 1.0, 21))
    np.testing.assert_allclose(table["omega"], table["omega"][::-1], atol=1e-10)
    assert np.argmin(table["omega"]) == 10
    h = 1e-4
    fd = (omega.omega(np.array([0.3 + h])) - omega.omega(np.array([0.3 - h]))) / (2 * h)
    assert fd[0] == pytest.approx(omega.derivative(np.array([0.3]))[0], rel=1e-6)
    assert omega.derivatives_at(0.0)["omega_2"] > 0


def test_effective_potential_degenerate_at_critical_temperature():
    """Test that omega'' vanishes and omega'''' is positive at sigma_c^2."""
    s2 = critical_temperature(1.0, xtol=1e-11)
    derivs = curie_weiss_effective_potential(s2, 1.0).derivatives_at(0.0)
    assert abs(derivs["omega_2"]) < 1e-4
    assert derivs["omega_4"] > 0


def test_barycenter_variance_without_interaction():
    """Test the i.i.d. case Var(rho*) / N."""
    site = tilted_measure(curie_weiss_site(1.0, 0.0), 0.0)
    assert gibbs_barycenter_variance(50, 1.0, 0.0) == pytest.approx(site.variance / 50, rel=1e-10)


def test_barycenter_variance_supercritical_scaling():
    """Test that N times the barycenter variance converges above sigma_c^2."""
    omega = curie_weiss_effective_potential(1.0, 1.0)
    a = 1000 * gibbs_barycenter_variance(1000, 1.0, 1.0, omega)
    b = 4000 * gibbs_barycenter_variance(4000, 1.0, 1.0, omega)
    assert a == pytest.approx(b, rel=2e-2)


def test_stationary_entropy_is_bounded_above_critical_temperature():
    """Test that H stays bounded in N for sigma^2 = 1."""
    omega = curie_weiss_effective_potential(1.0, 1.0)
    h = [stationary_entropy_curie_weiss(n, 1.0, 1.0, omega) for n in (2 ** 8, 2 ** 12, 2 ** 16)]
    assert h[-1] - h[0] < 0.05
    assert all(v > -1e-6 for v in h)


@pytest.mark.slow
def test_stationary_entropy_slope_at_critical_temperature():
    """Test H ~ (1/4) ln N at sigma_c^2."""
    s2 = critical_temperature(1.0, xtol=1e-11)
    omega = curie_weiss_effective_potential(s2, 1.0)
    N = np.array([2 ** k for k in range(12, 21)])
    H = [stationary_entropy_curie_weiss(int(n), s2, 1.0, omega) for n in N]
    slope = np.polyfit(np.log(N), H, 1)[0]
    assert slope == pytest.approx(0.25, abs=0.02)


def test_nu_log_partition_gaussian():
    """Test log int exp(-N x^2 / 2) dx = log sqrt(2 pi / N)."""
    for N in (1, 10, 1000):
        assert nu_log_partition(named_1d("quadratic"), N) == pytest.approx(0.5 * np.log(2 * np.pi / N), abs=1e-10)
