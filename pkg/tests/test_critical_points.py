"""
Test suite for critical-point search, the analytic PCA set and the
Curie-Weiss self-consistency equation.
"""
import numpy as np
import pytest

from src.mflab_critical_points import (critical_temperature, curie_weiss_f, curie_weiss_f_prime,
                                       curie_weiss_fixed_points, find_critical_points, pca_critical_set,
                                       pca_critical_value)
from src.mflab_potentials import pca
from src.mflab_process import init_pool
from src.mflab_validation import InputError


def test_double_well_critical_points(double_well):
    """Test the three roots of x^3 - x with their indices and values."""
    search = find_critical_points(double_well, [[-2.0, 2.0]])
    assert len(search) == 3
    locations = [p.location[0] for p in search]
    np.testing.assert_allclose(locations, [-1.0, 0.0, 1.0], atol=1e-10)
    assert [p.index for p in search] == [0, 1, 0]
    np.testing.assert_allclose([p.value for p in search], [-0.25, 0.0, -0.25], atol=1e-12)
    assert search[1].spectrum[0] == pytest.approx(-1.0)
    assert search[1].kind == "saddle"
    assert len(search.global_minimizers()) == 2


def test_search_is_independent_of_workers(double_well):
    """Test that a worker pool gives the same points."""
    serial = [p.location[0] for p in find_critical_points(double_well)]
    init_pool(3)
    parallel = [p.location[0] for p in find_critical_points(double_well)]
    assert serial == parallel


def test_pca_search_matches_analytic_set(pca_spec):
    """Test Newton search against the closed-form PCA critical set."""
    search = find_critical_points(pca_spec)
    analytic = pca_critical_set(np.diag([1.0, 0.25]), 0.5)
    assert len(search) == len(analytic) == 3
    for found, expected in zip(search, analytic):
        np.testing.assert_allclose(found.location, expected.location, atol=1e-8)
        assert found.value == pytest.approx(expected.value, abs=1e-10)
    minimizer = analytic[-1]
    assert minimizer.value - pca_spec.offset == pytest.approx(-0.5)
    np.testing.assert_allclose(np.abs(minimizer.location), [np.sqrt(0.5), 0.0, np.sqrt(0.5), 0.0], atol=1e-12)
    assert analytic[1].kind == "saddle"


def test_pca_strong_confinement_has_single_minimizer():
    """Test that kappa above the top eigenvalue leaves only the origin."""
    points = pca_critical_set(np.diag([1.0, 0.25]), 2.0)
    assert len(points) == 1
    assert points[0].index == 0
    np.testing.assert_allclose(points[0].location, np.zeros(4))
    assert len(find_critical_points(pca(np.diag([1.0, 0.25]), 2.0))) == 1


def test_pca_repeated_eigenvalue_is_degenerate():
    """Test that a double top eigenvalue gives degenerate minimizers."""
    points = pca_critical_set(np.eye(2), 0.5)
    off_origin = [p for p in points if np.linalg.norm(p.location) > 0]
    assert off_origin
    assert all(p.degenerate for p in off_origin)


def test_search_rejects_high_dimension():
    """Test that grid seeding is limited to d <= 4."""
    with pytest.raises(InputError):
        find_critical_points(pca(np.eye(3), 0.5))


def test_curie_weiss_hot_has_single_fixed_point():
    """Test the high-temperature regime."""
    report = curie_weiss_fixed_points(1.0, 1.0)
    assert report.fixed_points == [0.0]
    assert report.derivative_at_zero < 1.0
    assert curie_weiss_f(0.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_curie_weiss_cold_has_three_fixed_points():
    """Test the low-temperature regime."""
    report = curie_weiss_fixed_points(0.01, 1.0)
    assert len(report.fixed_points) == 3
    m_star = report.fixed_points[-1]
    assert m_star > 0
    assert report.fixed_points[0] == pytest.approx(-m_star)
    assert max(report.residuals) < 1e-8
    assert curie_weiss_f(m_star, 0.01, 1.0) == pytest.approx(m_star, abs=1e-8)


def test_critical_temperature():
    """Test sigma_c^2 for kappa0 = 1."""
    s2 = critical_temperature(1.0)
    assert 0.45 <= s2 <= 0.47
    assert curie_weiss_f_prime(0.0, s2, 1.0) == pytest.approx(1.0, abs=1e-5)


def test_pca_critical_value_closed_form():
    """Test -(lam - kappa)^2 / (2 lam) against V_kappa at the critical point."""
    assert pca_critical_value(1.0, 0.5) == pytest.approx(-0.125)
    spec = pca(np.diag([1.0, 0.25]), 0.5)
    point = np.sqrt(0.5) * np.array([1.0, 0.0, 1.0, 0.0])
    assert float(spec.value(point)) == pytest.approx(pca_critical_value(1.0, 0.5, spec.offset), abs=1e-12)


@pytest.mark.parametrize("gap,expected", [(1e-4, 0.01923), (1e-5, 0.006080)])
def test_curie_weiss_fixed_points_just_below_critical_temperature(gap, expected):
    """Test that the small nonzero fixed points near sigma_c^2 are found, even below the grid step."""
    s2 = critical_temperature(1.0, xtol=1e-12) - gap
    report = curie_weiss_fixed_points(s2, 1.0)
    assert report.derivative_at_zero > 1.0
    assert len(report.fixed_points) == 3
    m_star = report.fixed_points[-1]
    assert report.fixed_points[0] == pytest.approx(-m_star)
    assert m_star == pytest.approx(expected, rel=2e-2)
    assert curie_weiss_f(m_star, s2, 1.0) == pytest.approx(m_star, abs=1e-10)


@pytest.mark.parametrize("sigma2", [1.0, 0.4])
def test_curie_weiss_f_prime_matches_finite_differences(sigma2):
    """Test kappa Var(gamma_0) against a central difference of f at 0."""
    h = 5e-4
    fd = (curie_weiss_f(h, sigma2, 1.0) - curie_weiss_f(-h, sigma2, 1.0)) / (2 * h)
    assert curie_weiss_f_prime(0.0, sigma2, 1.0) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2])
def test_pca_random_matrix_matches_analytic_set(rng, n):
    """Test Newton search against the closed-form set for a random SPD matrix."""
    A = rng.normal(size=(n, n))
    M = A @ A.T + 0.1 * np.eye(n)
    lam = np.sort(np.linalg.eigvalsh(M))
    # between the two eigenvalues, or below the only one
    kappa = 0.5 * (lam[0] + lam[1]) if n == 2 else 0.5 * lam[0]
    analytic = pca_critical_set(M, kappa)
    search = find_critical_points(pca(M, kappa))
    assert len(search) == len(analytic) == 3
    for found, expected in zip(search, analytic):
        np.testing.assert_allclose(found.location, expected.location, atol=1e-6)
        assert found.value == pytest.approx(expected.value, abs=1e-6)
        assert found.index == expected.index
