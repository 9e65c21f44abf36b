"""
Test suite for metastability: Eyring-Kramers predictions, exponential-law
tests, Arrhenius fits, the heteroclinic exit law and the coupled
localized systems.
"""
import math

import numpy as np
import pytest

from src.mflab_metastability import (CensoringError, GeometryError, HeteroclinicData, PredictionError,
                                     compute_heteroclinic, coupled_local_coincidence, exit_sides,
                                     exponentiality_test, eyring_kramers_predict, fit_arrhenius,
                                     reference_exit_law, saddle_exit_study, transition_study)
from src.mflab_potentials import localized_convexification, quartic1d
from src.mflab_validation import ParameterError


def test_eyring_kramers_double_well(double_well):
    """Test the analytic prediction pi sqrt(2) e^5 at N = 20."""
    out = eyring_kramers_predict(double_well, [-1.0], [0.0], 20)
    assert out["time"] == pytest.approx(math.pi * math.sqrt(2) * math.exp(5), rel=1e-9)
    assert out["barrier"] == pytest.approx(0.25)
    assert out["lambda1"] == pytest.approx(1.0)


def test_eyring_kramers_is_symmetric(double_well):
    """Test that both wells of the symmetric double well give the same time."""
    left = eyring_kramers_predict(double_well, [-1.0], [0.0], 12)
    right = eyring_kramers_predict(double_well, [1.0], [0.0], 12)
    assert left["time"] == pytest.approx(right["time"], rel=1e-12)


def test_eyring_kramers_rejects_wrong_points(double_well):
    """Test that a saddle passed as minimizer is a prediction error."""
    with pytest.raises(PredictionError):
        eyring_kramers_predict(double_well, [0.0], [0.0], 10)


def test_exponentiality_of_exponential_samples(rng):
    """Test that Exp(1) samples pass the KS test."""
    result = exponentiality_test(rng.exponential(3.0, size=2000))
    assert result["pvalue"] > 0.01
    assert result["samples"] == 2000


def test_exponentiality_of_point_mass():
    """Test the analytic KS distance 1 - e^{-1} of a point mass."""
    result = exponentiality_test(np.full(500, 2.0))
    assert result["statistic"] == pytest.approx(1 - math.exp(-1), abs=1e-9)
    assert result["pvalue"] < 1e-6


def test_exponentiality_rejects_censored_or_few_samples(rng):
    """Test the input requirements of the KS test."""
    samples = rng.exponential(size=300)
    samples[0] = np.inf
    with pytest.raises(CensoringError):
        exponentiality_test(samples)
    with pytest.raises(ParameterError):
        exponentiality_test(rng.exponential(size=20))


def test_fit_arrhenius_exact_line():
    """Test the least-squares slope on exact data."""
    N = np.array([10, 20, 30, 40])
    fit = fit_arrhenius(N, 3.0 * np.exp(0.25 * N))
    assert fit["slope"] == pytest.approx(0.25)
    assert math.exp(fit["intercept"]) == pytest.approx(3.0)
    assert fit["ci_low"] <= 0.25 <= fit["ci_high"]


def test_heteroclinic_symmetry(double_well):
    """Test that both branches of the symmetric double well take the same time."""
    het = compute_heteroclinic(double_well, [0.0], 0.5)
    assert het.converged[1] and het.converged[-1]
    assert het.times[1] == pytest.approx(het.times[-1], abs=1e-6)
    assert het.lambda1 == pytest.approx(1.0)
    np.testing.assert_allclose(np.abs(het.exits[1]), [0.5], atol=1e-8)


def test_heteroclinic_requires_a_saddle(double_well):
    """Test that a minimizer is rejected."""
    with pytest.raises(GeometryError):
        compute_heteroclinic(double_well, [1.0], 0.2)


def test_exit_sides_of_one_dimensional_saddle(capped_saddle):
    """Test that every exit of a 1-D saddle is on the side of its nearest exit point."""
    het = compute_heteroclinic(capped_saddle, [0.0], 0.5)
    assert het.lambda1 == pytest.approx(1.0)
    sides, keep = exit_sides(np.array([[0.5], [-0.5], [0.49]]), het)
    assert sides.tolist() == [1, -1, 1]
    assert keep.all()


def test_exit_sides_drops_ambiguous_exit():
    """Test that an exit on the +1 side nearer the -1 exit point is masked out."""
    het = HeteroclinicData(z=np.zeros(2), delta=0.5, lambda1=1.0, v1=np.array([1.0, 0.0]),
                           exits={1: np.array([0.1, 0.49]), -1: np.array([-0.1, -0.49])},
                           exit_times={1: 1.0, -1: 1.0}, times={1: 0.0, -1: 0.0}, cauchy={1: [], -1: []},
                           converged={1: True, -1: True}, curves={1: np.zeros((0, 2)), -1: np.zeros((0, 2))})
    points = np.array([[0.1, 0.49], [0.05, -0.49], [-0.1, -0.49]])
    sides, keep = exit_sides(points, het)
    assert sides.tolist() == [1, 1, -1]
    assert keep.tolist() == [True, False, True]


def test_reference_exit_law_is_balanced():
    """Test the reference sample construction."""
    ref = reference_exit_law({1: 2.0, -1: 2.0}, 1.0, 20000, seed=4)
    assert ref["values"].shape == (20000,)
    assert abs(np.mean(ref["sides"] == 1) - 0.5) < 0.02
    # E ln|Z| = -(gamma + ln 2) / 2
    assert ref["mean_log_abs_z"] == pytest.approx(-0.5 * (np.euler_gamma + np.log(2)), abs=0.03)


def test_transition_study_rejects_overlapping_balls(double_well):
    """Test that the balls around x0, x1 and z must be disjoint."""
    with pytest.raises(GeometryError):
        transition_study(double_well, [-1.0], [1.0], [0.0], 0.6, [4], 10)


def test_coincidence_with_zero_horizon(double_well):
    """Test that nothing can diverge before the first step."""
    local = localized_convexification(double_well, [1.0], 0.2)
    out = coupled_local_coincidence(double_well, local, 16, 0.0, 5)
    assert out["fraction"] == 1.0


def test_coincidence_requires_start_inside_ball(double_well):
    """Test the start condition of the coupling."""
    local = localized_convexification(double_well, [1.0], 0.2)
    with pytest.raises(ParameterError):
        coupled_local_coincidence(double_well, local, 16, 1.0, 5, start=[0.5])


@pytest.mark.slow
def test_coincidence_in_a_deep_well(double_well):
    """Test that with N = 512 the coupled paths almost never separate."""
    local = localized_convexification(double_well, [1.0], 0.2)
    out = coupled_local_coincidence(double_well, local, 512, 10.0, 100, seed=1)
    assert out["fraction"] >= 0.99


@pytest.mark.slow
def test_coincidence_fails_in_a_tiny_well(double_well):
    """Test that a very small ball is left quickly."""
    local = localized_convexification(double_well, [1.0], 0.01)
    out = coupled_local_coincidence(double_well, local, 64, 10.0, 100, seed=1)
    assert out["fraction"] < 0.99


@pytest.mark.slow
def test_transition_arrhenius_slope():
    """Test the Arrhenius slope of the reduced double-well barycenter."""
    spec = quartic1d(1.0)
    study = transition_study(spec, [-1.0], [1.0], [0.0], 0.3, [12, 16, 20, 24, 28], 300, dt=1e-3, seed=2,
                             ks_N=24, ks_samples=1000)
    assert not study.excluded
    assert study.medians_increasing()
    assert study.fit["slope"] == pytest.approx(0.25, rel=0.1)
    assert study.ks["statistic"] < 0.08


@pytest.mark.slow
def test_saddle_exit_sides_and_law():
    """Test the balanced exit sides and the centered exit-time law."""
    spec = quartic1d(1.0)
    study = saddle_exit_study(spec, [0.0], 0.5, [4096], 2000, seed=3, reference_samples=200000)
    assert study.ambiguous[4096] == 0
    assert abs(study.side_fraction[4096] - 0.5) <= study.side_bound[4096]
    assert study.ks[4096]["statistic"] < 0.1
