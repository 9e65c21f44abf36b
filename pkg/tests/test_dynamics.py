"""
Test suite for particle and barycenter simulation and the one-dimensional
mean-field Fokker-Planck solver.
"""
import numpy as np
import pytest

from src.mflab_config import config_manager
from src.mflab_dynamics import (DivergenceError, InitSpec, SimConfig, StepSizeError, UnsupportedModelError, em_step,
                                gaussian_family_flow, initial_cloud, noise_block, ou_cloud_control, particle_drift,
                                replica_stream, simulate_barycenter, simulate_particles, solve_mckean_vlasov_1d)
from src.mflab_gibbs import tilted_measure
from src.mflab_measures import Density1D, GaussianSpec, w2
from src.mflab_potentials import potential_1d, quadratic
from src.mflab_process import init_pool


def test_replica_paths_do_not_depend_on_workers(double_well):
    """Test that each replica's path is a pure function of (seed, N, replica id)."""
    cfg = SimConfig(double_well, 8, 1e-2, 1.0, seed=11, init=InitSpec("gaussian", [0.5], 0.2), batches=0)
    serial = simulate_particles(cfg, replicas=4)
    init_pool(3)
    parallel = simulate_particles(cfg, replicas=4)
    np.testing.assert_array_equal(serial.barycenters, parallel.barycenters)

    shifted = SimConfig(double_well, 8, 1e-2, 1.0, seed=11, replica_id=2, init=InitSpec("gaussian", [0.5], 0.2),
                        batches=0)
    tail = simulate_particles(shifted, replicas=2)
    np.testing.assert_array_equal(tail.barycenters, serial.barycenters[2:])


def test_barycenter_replay_matches_particles(double_well):
    """Test that the reduced SDE driven by recorded increments follows the particle barycenter."""
    init = InitSpec("gaussian", [0.3], 0.5)
    cfg = SimConfig(double_well, 16, 1e-3, 0.5, seed=5, init=init, batches=0, record_increments=True)
    full = simulate_particles(cfg, replicas=2)
    reduced = simulate_barycenter(cfg, replicas=2, increments=full.increments)
    np.testing.assert_allclose(reduced.barycenters, full.barycenters, atol=1e-10)


def test_noise_free_barycenter_solves_gradient_flow(double_well):
    """Test that without noise the barycenter follows dm/dt = -grad V_kappa(m)."""
    dt = 1e-4
    cfg = SimConfig(double_well, 1, dt, 2.0, init=InitSpec("point", [0.2]), noise=False, thin=100, batches=0)
    batch = simulate_barycenter(cfg)
    flow = gaussian_family_flow(double_well, [0.2], 1.0, batch.times)
    np.testing.assert_allclose(batch.barycenters[0, :, 0], flow["means"][:, 0], atol=10 * dt)


def test_ou_stationary_variance():
    """Test that V = 0 particles equilibrate to variance 1/kappa."""
    spec = quadratic(1.0, 1)
    cfg = SimConfig(spec, 64, 1e-2, 60.0, seed=3, init=InitSpec("gaussian", [0.0], 1.0), burn_in=10.0, batches=25)
    ergodic = simulate_particles(cfg, replicas=4, record_path=False).ergodic()
    centered = ergodic["centered_variance"]
    target = (1 - 1 / 64) / 1.0
    assert abs(centered["estimate"] - target) <= 3 * centered["stderr"] + 1e-2 * target


def test_point_and_recentered_initial_clouds(pca_spec):
    """Test the initial cloud variants."""
    point = SimConfig(pca_spec, 5, 1e-2, 0.0, init=InitSpec("point", [1.0, 0.0, 0.0, 0.0]))
    np.testing.assert_array_equal(initial_cloud(point, 0), np.tile([1.0, 0.0, 0.0, 0.0], (5, 1)))
    recentered = SimConfig(pca_spec, 50, 1e-2, 0.0, init=InitSpec("gaussian", [0.1] * 4, 1.0, recenter=True))
    np.testing.assert_allclose(initial_cloud(recentered, 7).mean(axis=0), [0.1] * 4, atol=1e-12)


def test_file_initial_cloud(tmp_path, double_well):
    """Test loading an initial cloud from CSV."""
    path = tmp_path / "cloud.csv"
    path.write_text("x0\r\n0.5\r\n-0.5\r\n1.5\r\n", encoding="utf-8")
    cfg = SimConfig(double_well, 3, 1e-2, 0.0, init=InitSpec("file", path=str(path)))
    np.testing.assert_allclose(initial_cloud(cfg, 0)[:, 0], [0.5, -0.5, 1.5])


def test_invalid_simulation_configs(double_well, curie_weiss_hot):
    """Test step-size, model and barycenter restrictions."""
    with pytest.raises(StepSizeError):
        SimConfig(double_well, 4, 0.0, 1.0)
    with pytest.raises(UnsupportedModelError):
        SimConfig(double_well, 4, 1e-2, 1.0, model="vlasov")
    cw = SimConfig(curie_weiss_hot, 4, 1e-2, 1.0)
    assert cw.model == "curie_weiss"
    with pytest.raises(UnsupportedModelError):
        simulate_barycenter(cw)


def test_divergence_is_reported(double_well):
    """Test that a blow-up names the step."""
    config_manager.load_from_dict({"log_file": None, "divergence_threshold": 10.0})
    cfg = SimConfig(double_well, 2, 0.5, 5.0, init=InitSpec("point", [3.0]), noise=False, batches=0)
    with pytest.raises(DivergenceError) as excinfo:
        simulate_particles(cfg)
    assert "step" in excinfo.value.message
    assert excinfo.value.exit_code == 3


def test_toy_pde_follows_gaussian_family(double_well):
    """Test the finite-volume flow against the Gaussian-family ODE."""
    run = solve_mckean_vlasov_1d(double_well, GaussianSpec([0.5], 0.25), horizon=2.0, cells=801, record_every=0.5)
    flow = gaussian_family_flow(double_well, [0.5], 0.25, run.times)
    assert np.max(np.abs(run.means - flow["means"][:, 0])) < 5e-3
    assert np.max(np.abs(run.variances - flow["variances"])) < 5e-3
    assert run.max_free_energy_increase <= 1e-8
    assert run.max_mass_defect <= 1e-9
    assert run.min_density >= 0
    assert np.all(np.diff(run.free_energies) <= 1e-8)


def test_pde_rejects_large_step(double_well):
    """Test that the stability bound is enforced with a suggested step."""
    with pytest.raises(StepSizeError) as excinfo:
        solve_mckean_vlasov_1d(double_well, GaussianSpec([0.0], 0.5), dt=1.0, horizon=1.0, cells=201)
    assert "try dt=" in excinfo.value.message


@pytest.mark.slow
def test_supercritical_curie_weiss_pde_converges(curie_weiss_hot):
    """Test that the Curie-Weiss flow at sigma^2 = 1 relaxes to exp(-V)."""
    run = solve_mckean_vlasov_1d(curie_weiss_hot, GaussianSpec([0.5], 0.25), horizon=50.0, cells=401,
                                 record_every=10.0)
    final = run.densities[-1]
    law = tilted_measure(potential_1d(curie_weiss_hot), 0.0)
    stationary = Density1D(final.nodes, np.exp(law.log_density(final.nodes)), final.weights).normalize()
    assert w2(final, stationary) <= 1e-3


def test_ou_cloud_control_shrinks_with_N():
    """Test that larger stationary OU clouds stay closer to their Gaussian law."""
    out = ou_cloud_control([16, 256], seeds=5, horizon_factor=1.0, dt=0.05, seed=3)
    assert out["N_list"] == [16, 256]
    assert out["per_seed"].shape == (2, 5)
    assert out["decreasing"]


def test_em_step_with_shared_noise(double_well):
    """Test that one noise block drives the Euler-Maruyama step of every lane stack alike."""
    gens = [replica_stream(5, 4, r) for r in range(2)]
    block = noise_block(gens, np.arange(2), 3, (4, 1))
    assert block.shape == (2, 3, 4, 1)
    again = noise_block([replica_stream(5, 4, r) for r in range(2)], np.arange(2), 3, (4, 1))
    np.testing.assert_array_equal(block, again)

    drift = particle_drift(double_well, "toy")
    X = np.full((2, 4, 1), 0.5)
    noise = np.sqrt(2 * 0.01) * block[:, 0]
    np.testing.assert_array_equal(em_step(drift, X, 0.01, noise), X - 0.01 * drift(X) + noise)
    np.testing.assert_array_equal(em_step(drift, X, 0.01), X - 0.01 * drift(X))
