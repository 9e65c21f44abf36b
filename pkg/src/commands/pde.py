"""
pde command: finite-volume mean-field Fokker-Planck flow from a Gaussian,
checked against the Gaussian-family ODE (toy model) or the stationary law
(supercritical Curie-Weiss).
"""
from typing import Any, Dict

import numpy as np

from ..mflab_critical_points import curie_weiss_f_prime
from ..mflab_dynamics import gaussian_family_flow, solve_mckean_vlasov_1d
from ..mflab_gibbs import tilted_measure
from ..mflab_logging import get_logger
from ..mflab_measures import Density1D, GaussianSpec, density_entropy_fisher, gaussian_entropy_fisher, w2
from ..mflab_potentials import potential_1d
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check

logger = get_logger("commands.pde")


def run_pde(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    rho0 = GaussianSpec(np.array([params["m0"]]), params["s0_2"])
    run = solve_mckean_vlasov_1d(spec, rho0, dt=params["dt"], horizon=params["horizon"], cells=params["cells"],
                                 record_every=params["record_every"])
    writer.write_csv("pde.csv", ["t", "mean", "variance", "free_energy", "mass"], run.rows())
    summary: Dict[str, Any] = {
        "potential": spec.describe(),
        "model": run.model,
        "box": list(run.box),
        "cells": run.cells,
        "dt": run.dt,
        "max_mass_defect": run.max_mass_defect,
        "max_free_energy_increase": run.max_free_energy_increase,
        "min_density": run.min_density,
    }
    checks = [
        make_check("free_energy_monotone", run.max_free_energy_increase, 0.0, 1e-8,
                   run.max_free_energy_increase <= 1e-8),
        make_check("mass_conserved", run.max_mass_defect, 0.0, 1e-9, run.max_mass_defect <= 1e-9),
        make_check("positivity", run.min_density, ">=0", None, run.min_density >= 0),
    ]

    if run.model == "toy":
        flow = gaussian_family_flow(spec, [params["m0"]], params["s0_2"], run.times)
        mean_err = float(np.max(np.abs(run.means - flow["means"][:, 0])))
        var_err = float(np.max(np.abs(run.variances - flow["variances"])))
        writer.write_csv("gaussian_flow.csv", ["t", "mean", "variance"],
                         list(zip(run.times, flow["means"][:, 0], flow["variances"])))
        summary.update(mean_error=mean_err, variance_error=var_err)
        # distance of the final Gaussian to its local equilibrium N(-V'(m)/kappa, 1/kappa)
        m_end = flow["means"][-1]
        local = GaussianSpec(-spec.v_grad(m_end) / spec.kappa, 1.0 / spec.kappa)
        summary["final_entropy_fisher"] = gaussian_entropy_fisher(GaussianSpec(m_end, flow["variances"][-1]), local)
        checks.append(make_check("mean_vs_ode", mean_err, 0.0, 5 * run.dt, mean_err <= 5 * run.dt))
        checks.append(make_check("variance_law", var_err, 0.0, params["variance_tol"],
                                 var_err <= params["variance_tol"]))
    elif curie_weiss_f_prime(0.0, spec.sigma2, spec.kappa0) < 1.0:
        site = potential_1d(spec)
        law = tilted_measure(site, 0.0)
        # stationary law on the solver cells so both sides share one discretization
        final = run.densities[-1]
        stationary = Density1D(final.nodes, np.exp(law.log_density(final.nodes)), final.weights).normalize()
        distance = w2(run.densities[-1], stationary)
        summary["final_w2_to_stationary"] = distance
        summary["final_entropy_fisher"] = density_entropy_fisher(run.densities[-1], law.log_density,
                                                                 lambda x: -site.derivative(x))
        checks.append(make_check("converges_to_stationary", distance, 0.0, params["w2_tol"],
                                 distance <= params["w2_tol"]))

    summary["checks"] = checks
    logger.info(f"pde: {run.model} flow over {len(run.times)} records, dt={run.dt:.3g}")
    return summary


command = Command("pde", run_pde, "Mean-field Fokker-Planck flow in one dimension")
