"""
Test suite for functional-inequality profiles and constants.
"""
import numpy as np
import pytest

from src.mflab_critical_points import CriticalPointSearch
from src.mflab_inequalities import (AnalyticError, DependencyError, curie_weiss_suite, fit_power_law,
                                    g_and_phi_from_theta, lojasiewicz_profile, lsi_constant_bundle, pl_constant,
                                    poincare_lower_bound)
from src.mflab_potentials import named_1d, pca, quadratic
from src.mflab_validation import ParameterError

QUARTIC_GROWTH = {"c1": 12.0, "c2": 12.0, "beta": 4.0}


def test_fit_power_law_exact():
    """Test that a pure power law is recovered on its smallest decade."""
    x = np.geomspace(1e-6, 1.0, 61)
    fit = fit_power_law(x, 3.0 * x ** 1.5)
    assert fit["exponent"] == pytest.approx(1.5, abs=1e-10)
    assert fit["prefactor"] == pytest.approx(3.0, rel=1e-8)
    assert fit["points"] == 11


def test_fit_power_law_ignores_floor():
    """Test that entries at or below the floor are dropped."""
    fit = fit_power_law([1.0, 2.0, 3.0], [0.0, 0.0, 1.0])
    assert np.isnan(fit["exponent"])
    assert fit["points"] == 1


def test_profile_of_pure_confinement(toy_quadratic):
    """Test Theta_1(r) = r/2 and Phi_1(r) = r for V = 0, kappa = 1."""
    profile = lojasiewicz_profile(toy_quadratic)
    np.testing.assert_allclose(profile.theta1, profile.r / 2, rtol=1e-8)
    np.testing.assert_allclose(profile.phi1, profile.r, rtol=1e-8)
    assert profile.theta1_at_zero == 0.0
    assert profile.tight
    assert profile.pl_holds
    assert profile.theta_fit["exponent"] == pytest.approx(1.0, abs=1e-6)
    assert profile.phi_fit["exponent"] == pytest.approx(1.0, abs=1e-6)


def test_profile_is_monotone(double_well):
    """Test that Theta_1, Phi_1 and Theta_tilde - r/(2 kappa) are nondecreasing."""
    profile = lojasiewicz_profile(double_well)
    assert np.all(np.diff(profile.theta1) >= 0)
    phi1 = profile.phi1[np.isfinite(profile.phi1)]
    assert np.all(np.diff(phi1) >= 0)
    assert np.all(np.diff(profile.theta_tilde - profile.r / (2 * profile.kappa)) >= -1e-12)


def test_double_well_profile_is_defective(double_well):
    """Test that the saddle at 0 gives Theta_1(0) = 1/4 and no PL inequality."""
    profile = lojasiewicz_profile(double_well)
    assert profile.theta1_at_zero == pytest.approx(0.25, abs=1e-10)
    assert not profile.tight
    assert not profile.pl_holds
    assert len(profile.minimizers) == 2
    summary = profile.summary()
    assert summary["critical_points"] == 3


def test_profile_rejects_bad_r_grid(toy_quadratic):
    """Test that the r grid must be positive and increasing."""
    with pytest.raises(ParameterError):
        lojasiewicz_profile(toy_quadratic, r_grid=[0.1, 0.05])


def test_profile_without_minimizer(double_well, monkeypatch):
    """Test the dependency error when the search returns no minimizer."""
    monkeypatch.setattr("src.mflab_inequalities.find_critical_points",
                        lambda *args, **kwargs: CriticalPointSearch([], 9, 9))
    with pytest.raises(DependencyError) as excinfo:
        lojasiewicz_profile(double_well)
    assert excinfo.value.exit_code == 3


def test_pl_constant_pure_confinement():
    """Test that V = 0, kappa = 2 has PL constant 1/2."""
    report = pl_constant(quadratic(2.0, 1))
    assert not report.diverges
    assert report.constant == pytest.approx(0.5, abs=1e-12)


def test_pl_constant_diverges_on_double_well(double_well):
    """Test that the saddle of the double well makes the PL ratio blow up."""
    report = pl_constant(double_well)
    assert report.diverges
    assert report.constant is None
    assert report.non_minimizing == 1


def test_pl_constant_strongly_convex_pca():
    """Test that pca with kappa above the top eigenvalue has a stable finite constant."""
    spec = pca(np.diag([1.0, 0.25]), 2.0)
    report = pl_constant(spec, grid_per_axis=7)
    assert not report.diverges
    assert report.local_limit == pytest.approx(1.0)
    assert report.constant >= report.local_limit
    assert report.refined_sup <= 1.02 * max(report.grid_sup, report.local_limit)


def test_lsi_bundle_quartic_upper_bound():
    """Test upper_tight = 2e (12 N)^(-1/2) for u = x^4 at N = 100."""
    bundle = lsi_constant_bundle(12.0, 12.0, 4.0, d=1, N=100)
    assert bundle.upper_tight == pytest.approx(2 * np.e / np.sqrt(1200), rel=1e-12)
    assert bundle.upper_tight == pytest.approx(0.1569, abs=1e-4)


def test_lsi_bundle_bakry_emery_limit():
    """Test that beta = 2 gives 2e/(N kappa)."""
    bundle = lsi_constant_bundle(3.0, 3.0, 2.0, N=10)
    assert bundle.upper_tight == pytest.approx(2 * np.e / 30, rel=1e-12)
    assert "degenerate_theta" in bundle.skipped
    assert bundle.summary()["degenerate_theta"] is None


def test_lsi_bundle_defective_constants():
    """Test rho_R = 4 and A = 3 at R = 2 for the quartic growth."""
    bundle = lsi_constant_bundle(12.0, 12.0, 4.0, R=2.0)
    assert bundle.rho_R == pytest.approx(4.0)
    assert bundle.defective_A == pytest.approx(3.0)
    assert bundle.defective_B == pytest.approx(6 * np.log(1 + 4 + 32) + 0.75 * 32)


def test_lsi_bundle_degenerate_profiles():
    """Test the tensorized profile dominates both of its pieces."""
    bundle = lsi_constant_bundle(12.0, 12.0, 4.0, kappa=0.5, N=10)
    assert bundle.theta_constant > 0
    assert bundle.theta_exponent == pytest.approx(2.0 / 3.0)
    r = np.geomspace(1e-6, 1e2, 40)
    tensorized = bundle.tensorized_theta(r)
    assert np.all(tensorized >= bundle.theta(r) * (1 - 1e-12))
    assert np.all(tensorized >= r / (2 * bundle.kappa) * (1 - 1e-12))
    assert bundle.talagrand_constant > 0


def test_lsi_bundle_skips_upper_below_threshold():
    """Test that N < 1/c2 leaves upper_tight out."""
    bundle = lsi_constant_bundle(0.5, 0.5, 4.0, N=1)
    assert bundle.upper_tight is None
    assert "upper_tight" in bundle.skipped


@pytest.mark.parametrize("args,hypothesis", [
    ((1.0, 2.0, 4.0), "c1 >= c2"),
    ((1.0, 0.0, 4.0), "c2 > 0"),
    ((1.0, 1.0, 1.5), "beta >= 2"),
])
def test_lsi_bundle_hypotheses(args, hypothesis):
    """Test that each violated hypothesis is named."""
    with pytest.raises(ParameterError) as excinfo:
        lsi_constant_bundle(*args)
    assert hypothesis in excinfo.value.message


def test_lsi_bundle_needs_N_at_least_one():
    """Test the N >= 1 hypothesis."""
    with pytest.raises(ParameterError):
        lsi_constant_bundle(12.0, 12.0, 4.0, N=0.5)


def test_g_and_phi_linear_theta():
    """Test that Theta(r) = r/2 gives g(u) = sqrt(2u) and Phi(x) = x."""
    r = np.geomspace(1e-10, 1e4, 300)
    transform = g_and_phi_from_theta(r, r / 2, kappa=1.0)
    u = np.array([1e-3, 0.1, 1.0, 50.0])
    np.testing.assert_allclose(transform.g(u), np.sqrt(2 * u), rtol=1e-8)
    np.testing.assert_allclose(transform.phi(u), u, rtol=1e-8)
    assert transform.theta_exponent == pytest.approx(1.0, abs=1e-10)


def test_g_and_phi_degenerate_theta():
    """Test that Theta(r) = r^(2/3) gives g(u) = 4 u^(1/4) and a quadratic Phi."""
    r = np.geomspace(1e-12, 1e4, 400)
    transform = g_and_phi_from_theta(r, r ** (2.0 / 3.0))
    np.testing.assert_allclose(transform.g(np.array([1e-4, 1.0, 10.0])),
                               4 * np.array([1e-4, 1.0, 10.0]) ** 0.25, rtol=1e-8)
    assert transform.phi_fit()["exponent"] == pytest.approx(2.0, abs=1e-6)


def test_g_inverse_round_trip():
    """Test g(g^-1(s)) = s on the tabulated range."""
    r = np.geomspace(1e-10, 1e3, 200)
    transform = g_and_phi_from_theta(r, r + r ** (2.0 / 3.0))
    s = np.geomspace(transform.g_values[0], transform.g_values[-1], 25)
    np.testing.assert_allclose(transform.g(transform.g_inv(s)), s, rtol=1e-8)


def test_g_and_phi_rejects_bad_theta():
    """Test the analytic preconditions on Theta."""
    r = np.linspace(0.0, 1.0, 20)
    with pytest.raises(AnalyticError):
        g_and_phi_from_theta(r, 0.1 + r)
    with pytest.raises(AnalyticError):
        g_and_phi_from_theta(r, 1.0 - r)
    positive = np.geomspace(1e-8, 1.0, 50)
    with pytest.raises(AnalyticError) as excinfo:
        g_and_phi_from_theta(positive, positive ** 0.4)
    assert "integrable" in excinfo.value.message


def test_poincare_quartic_scaling():
    """Test the N^(-1/2) lower bound of u = x^4 and its ordering below upper_tight."""
    report = poincare_lower_bound(named_1d("quartic"), [100, 200, 400, 800, 1600], lsi=QUARTIC_GROWTH)
    assert report.fit["exponent"] == pytest.approx(-0.5, abs=0.02)
    assert report.bounds[0] == pytest.approx(0.3380 / 10, rel=1e-3)
    assert report.sandwiched
    assert len(report.rows()) == 5


def test_poincare_quadratic_is_exact():
    """Test that u = x^2/2 gives the bound 1/N."""
    report = poincare_lower_bound(named_1d("quadratic"), [10, 100])
    assert report.bounds == pytest.approx([0.1, 0.01], rel=1e-8)
    assert report.upper == []


def test_poincare_needs_N_values():
    """Test that an empty N list is rejected."""
    with pytest.raises(ParameterError):
        poincare_lower_bound(named_1d("quartic"), [])


@pytest.mark.slow
def test_degenerate_pca_exponents():
    """Test the 2/3 Theta_1 exponent and quadratic Phi_1 at kappa = lambda_max."""
    spec = pca(np.diag([1.0, 0.25]), 1.0)
    profile = lojasiewicz_profile(spec, grid_per_axis=9)
    assert profile.theta_fit["exponent"] == pytest.approx(2.0 / 3.0, abs=0.05)
    assert profile.phi_fit["exponent"] == pytest.approx(2.0, abs=0.1)
    r = profile.r[profile.theta1 > 0]
    transform = g_and_phi_from_theta(r, profile.theta1[profile.theta1 > 0], kappa=spec.kappa)
    assert transform.phi_fit()["exponent"] == pytest.approx(2.0, abs=0.1)


@pytest.mark.slow
def test_curie_weiss_suite_at_critical_temperature():
    """Test the sqrt(N) scaling, the (1/4) ln N entropy and the degenerate effective potential."""
    report = curie_weiss_suite(1.0, [100, 200, 400, 800, 1600], [100, 200, 400, 800, 1600, 3200])
    assert report["lsi_lower_scaling"]["fit"]["exponent"] == pytest.approx(0.5, abs=0.03)
    assert report["entropy_slope"]["slope"] == pytest.approx(0.25, abs=0.02)
    assert report["omega_degeneracy"]["degenerate"]
    assert report["omega_degeneracy"]["positive_off_zero"]
    assert report["theta_exponent"] == pytest.approx(2.0 / 3.0, abs=0.05)
