"""
Test suite for measure utilities: Gaussian entropy and Fisher information,
Wasserstein distances, free energies and the Gaussian-family PL ratio.
"""
import numpy as np
import pytest

from src.mflab_gibbs import tilted_measure
from src.mflab_measures import (CapacityError, Density1D, GaussianSpec, UnsupportedError, density_entropy_fisher,
                                free_energy, gaussian, gaussian_entropy_fisher, gaussian_free_energy_gap,
                                pl_ratio_gaussian_scan, w2)
from src.mflab_potentials import named_1d, potential_1d, quadratic


def test_gaussian_entropy_fisher_variance_mismatch():
    """Test H and I for N(0, 2) against N(0, 1)."""
    out = gaussian_entropy_fisher(GaussianSpec([0.0], 2.0), GaussianSpec([0.0], 1.0))
    assert out["H"] == pytest.approx((1 - np.log(2)) / 2, abs=1e-12)
    assert out["I"] == pytest.approx(0.5, abs=1e-12)


def test_gaussian_entropy_of_shifted_local_equilibrium():
    """Test H = kappa |m - m'|^2 / 2 for equal variances 1/kappa."""
    out = gaussian_entropy_fisher(GaussianSpec([3.0], 0.5), GaussianSpec([0.0], 0.5))
    assert out["H"] == pytest.approx(9.0)


def test_gaussian_entropy_fisher_identical():
    """Test that equal Gaussians have zero H and I."""
    g = GaussianSpec([0.3, -1.0], 0.7)
    out = gaussian_entropy_fisher(g, g)
    assert out == {"H": 0.0, "I": 0.0}


def test_anisotropic_gaussian_is_unsupported():
    """Test that only isotropic covariances are accepted."""
    with pytest.raises(UnsupportedError):
        gaussian([0.0, 0.0], [1.0, 2.0])
    assert gaussian([0.0, 0.0], [[2.0, 0.0], [0.0, 2.0]]).s2 == 2.0


def test_w2_gaussians_and_samples():
    """Test the closed forms and the 1-D sorted coupling."""
    assert w2(GaussianSpec([0.0], 1.0), GaussianSpec([3.0], 1.0)) == pytest.approx(3.0)
    assert w2(np.array([0.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(0.0)
    assert w2(np.array([0.0, 2.0]), np.array([1.0, 3.0])) == pytest.approx(1.0)


def test_w2_multivariate_assignment(rng):
    """Test the exact assignment against brute force on a tiny set."""
    x = rng.normal(size=(3, 2))
    y = rng.normal(size=(3, 2))
    from itertools import permutations
    best = min(np.mean(np.sum((x - y[list(p)]) ** 2, axis=1)) for p in permutations(range(3)))
    assert w2(x, y) == pytest.approx(np.sqrt(best), rel=1e-10)


def test_w2_capacity_limit(rng):
    """Test that large multivariate sample sets must be subsampled."""
    x = rng.normal(size=(600, 2))
    with pytest.raises(CapacityError):
        w2(x, x)


def test_w2_density_against_gaussian():
    """Test the quantile coupling between a tabulated Gaussian and its closed form."""
    density = tilted_measure(named_1d("quadratic"), 0.5).density()
    assert w2(density, GaussianSpec([0.5], 1.0)) < 1e-2
    assert w2(density, GaussianSpec([1.5], 1.0)) == pytest.approx(1.0, abs=1e-2)


def test_density_entropy_fisher_vanishes_at_target():
    """Test that a density compared with itself has zero H and near-zero I."""
    law = tilted_measure(named_1d("quadratic"), 0.0)
    out = density_entropy_fisher(law.density(), law.log_density, lambda x: -x)
    assert out["H"] == pytest.approx(0.0, abs=1e-10)
    assert out["I"] < 1e-4


def test_toy_free_energy_of_standard_gaussian():
    """Test F = 0 for V = 0, kappa = 2 pi and mu = N(0, 1/kappa)."""
    spec = quadratic(2 * np.pi, 1)
    value = free_energy(GaussianSpec([0.0], 1.0 / (2 * np.pi)), spec).value
    assert value == pytest.approx(0.0, abs=1e-12)


def test_free_energy_renormalizes_density(curie_weiss_hot):
    """Test that an unnormalized density is normalized and flagged."""
    density = tilted_measure(potential_1d(curie_weiss_hot), 0.0).density()
    doubled = Density1D(density.nodes, 2 * density.values, density.weights)
    a = free_energy(density, curie_weiss_hot)
    b = free_energy(doubled, curie_weiss_hot)
    assert not a.renormalized
    assert b.renormalized
    assert a.value == pytest.approx(b.value, abs=1e-12)


def test_curie_weiss_free_energy_gaussian_matches_quadrature(curie_weiss_hot):
    """Test the Gaussian moment formula against a tabulated Gaussian."""
    g = GaussianSpec([0.2], 0.3)
    tabulated = tilted_measure(named_1d("quadratic"), 0.0).density()
    x = tabulated.nodes
    scaled = Density1D(0.2 + np.sqrt(0.3) * x, tabulated.values / np.sqrt(0.3), np.sqrt(0.3) * tabulated.weights)
    assert free_energy(g, curie_weiss_hot).value == pytest.approx(free_energy(scaled, curie_weiss_hot).value,
                                                                  abs=1e-8)


def test_quadratic_gaussian_pl_supremum():
    """Test sup 2 F_bar / I = 1/kappa on the Gaussian family for V = 0."""
    spec = quadratic(2.0, 1)
    m_grid = np.linspace(-2.0, 2.0, 9)[:, None]
    s2_grid = np.sort(np.append(np.geomspace(1e-2, 1e4, 121), 0.5))
    scan = pl_ratio_gaussian_scan(spec, m_grid, s2_grid)
    assert scan["sup"] == pytest.approx(0.5, rel=1e-9)
    tail = scan["variance_only"][np.isfinite(scan["variance_only"])]
    assert np.all(tail < 0.5)
    assert tail[-1] > 0.45
    assert scan["unique_minimizer"]


def test_gaussian_free_energy_gap_toy(toy_quadratic):
    """Test the gap and Fisher information on the toy Gaussian family."""
    at_rest = gaussian_free_energy_gap(np.zeros((1, 1)), 1.0, toy_quadratic, 0.0)
    assert at_rest["gap"][0] == pytest.approx(0.0)
    assert at_rest["fisher"][0] == pytest.approx(0.0)
    shifted = gaussian_free_energy_gap(np.array([[2.0]]), 1.0, toy_quadratic, 0.0)
    assert shifted["gap"][0] == pytest.approx(2.0)
    assert shifted["fisher"][0] == pytest.approx(4.0)
