"""
simulate command: particle system or reduced barycenter SDE, with thinned
barycenter paths, terminal moments and ergodic averages.
"""
from typing import Any, Dict

import numpy as np

from ..mflab_dynamics import InitSpec, SimConfig, ou_cloud_control, simulate_barycenter, simulate_particles
from ..mflab_logging import get_logger
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check

logger = get_logger("commands.simulate")


def _init_spec(spec, block: Dict[str, Any]) -> InitSpec:
    center = block["center"] if block["center"] is not None else [0.0] * spec.d
    variance = block["variance"] if block["variance"] is not None else 1.0 / spec.kappa
    return InitSpec(block["kind"], center, variance, block["path"])


def _run_ou_control(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    """Stationary OU clouds: median worst W2 to the Gaussian equilibrium must decrease in N."""
    report = ou_cloud_control(params["ou_N_list"], params["ou_seeds"], params["ou_horizon_factor"],
                              kappa=spec.kappa, dt=params["dt"], seed=seed)
    writer.write_csv("ou_control.csv", ["N", "median_max_w2"],
                     [[n, w] for n, w in zip(report["N_list"], report["median_max_w2"])])
    check = make_check("ou_w2_decreasing", report["median_max_w2"], "decreasing", None, report["decreasing"])
    return {"potential": spec.describe(), "mode": "ou-control", "ou_control": report, "checks": [check]}


def run_simulate(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    if params["mode"] == "ou-control":
        return _run_ou_control(spec, params, seed, writer)
    cfg = SimConfig(spec, params["N"], params["dt"], params["horizon"], model=params["model"], seed=seed,
                    init=_init_spec(spec, params["init"]), noise=params["noise"], thin=params["thin"],
                    burn_in=params["burn_in"], batches=params["batches"],
                    store_states=params["store"] == "states" and params["mode"] == "particles")
    replicas = params["replicas"]
    if params["mode"] == "particles":
        batch = simulate_particles(cfg, replicas=replicas)
    else:
        batch = simulate_barycenter(cfg, replicas=replicas)

    d = spec.d
    rows = []
    for k, rid in enumerate(batch.replica_ids):
        for t, bary in zip(batch.times, batch.barycenters[k]):
            if np.all(np.isfinite(bary)):
                rows.append([int(rid), t] + list(bary))
    writer.write_csv("trajectory.csv", ["replica", "t"] + [f"xbar{j}" for j in range(d)], rows)

    moments = batch.terminal_moments()
    writer.write_csv("terminal.csv", ["replica"] + [f"mean{j}" for j in range(d)] + ["second_moment"],
                     [[int(r)] + list(m) + [s] for r, m, s in
                      zip(batch.replica_ids, moments["mean"], moments["second_moment"])])
    if batch.states is not None:
        writer.write_csv("states.csv", ["replica", "t", "particle"] + [f"x{j}" for j in range(d)],
                         [[int(rid), t, i] + list(x)
                          for k, rid in enumerate(batch.replica_ids)
                          for t, cloud in zip(batch.times, batch.states[k])
                          for i, x in enumerate(cloud) if np.all(np.isfinite(x))])

    ergodic = batch.ergodic()
    summary: Dict[str, Any] = {"potential": spec.describe(), "mode": params["mode"], "model": cfg.model,
                               "steps": cfg.steps, "ergodic": ergodic}
    checks = []
    centered = ergodic.get("centered_variance")
    if centered and spec.kind == "quadratic" and params["noise"] and params["burn_in"] > 0:
        target = (1.0 - 1.0 / cfg.N) / spec.kappa
        tol = 3.0 * centered["stderr"]
        checks.append(make_check("centered_variance", centered["estimate"], target, tol,
                                 abs(centered["estimate"] - target) <= tol))
    summary["checks"] = checks
    logger.info(f"simulate: {replicas} replica(s) of {params['mode']} N={cfg.N}, {cfg.steps} steps")
    return summary


command = Command("simulate", run_simulate, "Particle and barycenter simulations")
