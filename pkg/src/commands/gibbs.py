"""
gibbs command: effective potential, moments of nu_N and the Curie-Weiss
stationary quantities.
"""
from typing import Any, Dict

import numpy as np

from ..mflab_critical_points import critical_temperature
from ..mflab_gibbs import (curie_weiss_effective_potential, gibbs_barycenter_variance, nu_moments,
                           stationary_entropy_curie_weiss)
from ..mflab_logging import get_logger
from ..mflab_potentials import Potential1D
from ..mflab_process import Command, get_pool
from ..mflab_reports import ReportWriter, make_check
from ..mflab_validation import ParameterError

logger = get_logger("commands.gibbs")


def _confined_1d(spec) -> Potential1D:
    return Potential1D(lambda x: spec.value(np.asarray(x, dtype=float)[..., None]),
                       lambda x: spec.gradient(np.asarray(x, dtype=float)[..., None])[..., 0],
                       spec.kind, even=spec.kind in ("quadratic", "curie_weiss"))


def _moment_rows(u, N_list, orders):
    moments = get_pool().map(lambda n: nu_moments(u, n, orders), N_list)
    return [[n, k, m[k]] for n, m in zip(N_list, moments) for k in orders]


def run_gibbs(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    if spec.d != 1:
        raise ParameterError("the gibbs command needs a one-dimensional potential", "commands.gibbs")
    orders = sorted(set(params["moment_orders"]))
    N_list = sorted(params["N_list"])
    summary: Dict[str, Any] = {"potential": spec.describe()}
    checks = []

    if spec.kind != "curie_weiss":
        u = _confined_1d(spec)
        rows = _moment_rows(u, N_list, orders)
        writer.write_csv("nu_moments.csv", ["N", "order", "moment"], rows)
        if spec.kind == "quadratic" and 2 in orders:
            worst = max(abs(m * n * spec.kappa - 1.0) for n, k, m in rows if k == 2)
            checks.append(make_check("quadratic_variance", worst, 0.0, 1e-10, worst <= 1e-10))
        summary["checks"] = checks
        return summary

    kappa0 = spec.kappa0
    sigma2 = critical_temperature(kappa0, xtol=1e-11) if params["at_critical"] else spec.sigma2
    omega = curie_weiss_effective_potential(sigma2, kappa0)
    table = omega.tabulate(np.linspace(-params["xi_max"], params["xi_max"], params["xi_points"]))
    writer.write_csv("omega.csv", ["xi", "omega", "omega_1", "omega_2"],
                     zip(table["xi"], table["omega"], table["omega_1"], table["omega_2"]))
    writer.write_csv("nu_moments.csv", ["N", "order", "moment"], _moment_rows(omega, N_list, orders))

    pool = get_pool()
    variances = pool.map(lambda n: gibbs_barycenter_variance(n, sigma2, kappa0, omega), N_list)
    writer.write_csv("barycenter_variance.csv", ["N", "second_moment"], zip(N_list, variances))
    entropy_N = sorted(params["entropy_N_list"])
    entropies = pool.map(lambda n: stationary_entropy_curie_weiss(n, sigma2, kappa0, omega), entropy_N)
    writer.write_csv("entropy.csv", ["N", "entropy"], zip(entropy_N, entropies))

    derivs = omega.derivatives_at(0.0)
    summary.update(sigma2=sigma2, kappa0=kappa0, omega_derivatives=derivs)
    if params["at_critical"]:
        checks.append(make_check("omega_2_at_0", derivs["omega_2"], 0.0, 1e-4, abs(derivs["omega_2"]) <= 1e-4))
        checks.append(make_check("omega_4_at_0", derivs["omega_4"], ">0", None, derivs["omega_4"] > 0))
        off_zero = table["omega_2"][np.abs(table["xi"]) > 1e-12]
        checks.append(make_check("omega_convex_off_zero", float(np.min(off_zero)), ">0", None,
                                 bool(np.all(off_zero > 0))))
    summary["checks"] = checks
    logger.info(f"gibbs: sigma2={sigma2:.6g}, omega''(0)={derivs['omega_2']:.3g}")
    return summary


command = Command("gibbs", run_gibbs, "Effective potential and Gibbs-measure moments")
