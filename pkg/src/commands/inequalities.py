"""
inequalities command: Lojasiewicz and coercivity profiles, the grid PL
constant, and optionally the explicit LSI bundle and Poincare lower bounds.
"""
from typing import Any, Dict

import numpy as np

from ..mflab_critical_points import seed_grid
from ..mflab_inequalities import (g_and_phi_from_theta, lojasiewicz_profile, lsi_constant_bundle, pl_constant,
                                  poincare_lower_bound)
from ..mflab_logging import get_logger
from ..mflab_measures import pl_ratio_gaussian_scan
from ..mflab_potentials import named_1d
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check
from ..mflab_validation import optional_box

logger = get_logger("commands.inequalities")

# growth constants (c1, c2, beta) of the named 1-D potentials
NAMED_GROWTH = {
    "quartic": {"c1": 12.0, "c2": 12.0, "beta": 4.0},
    "quadratic": {"c1": 1.0, "c2": 1.0, "beta": 2.0},
}


def _exponent_check(name, value, target, tol):
    return make_check(name, value, target, tol, abs(value - target) <= tol)


def _gaussian_family_check(spec, params, pl):
    """Gaussian-family PL ratio against max(1/kappa, C_PL(V_kappa))."""
    box = optional_box(params["box"], spec.d, spec.default_radius(), "commands.inequalities")
    scan = pl_ratio_gaussian_scan(spec, seed_grid(box, params["grid_per_axis"]),
                                  np.geomspace(1e-2, 1e3, 61) / spec.kappa)
    bound = max(1.0 / spec.kappa, pl.constant)
    sup = scan["sup"]
    passed = 0.98 / spec.kappa <= sup <= 1.02 * bound
    summary = {"sup": sup, "argmax_m": scan["argmax_m"], "argmax_s2": scan["argmax_s2"], "bound": bound,
               "variance_only_tail": float(scan["variance_only"][-1])}
    return summary, make_check("gaussian_pl_sup", sup, [1.0 / spec.kappa, bound], 0.02, passed)


def run_inequalities(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    profile = lojasiewicz_profile(spec, params["box"], params["grid_per_axis"], zoom_levels=params["zoom_levels"],
                                  zoom_per_axis=params["zoom_per_axis"], r_min=params["r_min"],
                                  r_max=params["r_max"], r_points=params["r_points"])
    writer.write_csv("profile.csv", ["r", "theta1", "phi1", "theta_tilde"], profile.rows())
    pl = pl_constant(spec, params["box"], params["grid_per_axis"])
    summary: Dict[str, Any] = {"potential": spec.describe(), "profile": profile.summary(), "pl": pl.summary()}
    checks = []
    if spec.kind != "curie_weiss" and not pl.diverges:
        summary["gaussian_family"], check = _gaussian_family_check(spec, params, pl)
        checks.append(check)
    if params["theta_exponent"] is not None:
        checks.append(_exponent_check("theta_exponent", profile.theta_fit["exponent"], params["theta_exponent"],
                                      params["theta_tol"]))
    if params["phi_exponent"] is not None:
        checks.append(_exponent_check("phi_exponent", profile.phi_fit["exponent"], params["phi_exponent"],
                                      params["phi_tol"]))

    if profile.tight:
        transform = g_and_phi_from_theta(profile.r, profile.theta_tilde, profile.kappa)
        writer.write_csv("g_phi.csv", ["u", "g", "phi_argument"], transform.rows())
        summary["coercivity"] = {"phi_fit": transform.phi_fit(), "theta_exponent": transform.theta_exponent}

    lsi = params.get("lsi")
    if lsi:
        bundle = lsi_constant_bundle(lsi["c1"], lsi["c2"], lsi["beta"], lsi["d"], lsi["kappa"], lsi["N"], lsi["R"])
        summary["lsi"] = bundle.summary()

    block = params.get("poincare")
    if block:
        growth = NAMED_GROWTH[block["u"]]
        report = poincare_lower_bound(named_1d(block["u"]), block["N_list"], lsi=growth)
        writer.write_csv("poincare.csv", ["N", "lower_bound", "upper_tight"], report.rows())
        target = -2.0 / growth["beta"]
        summary["poincare"] = {"fit": report.fit, "sandwiched": report.sandwiched}
        checks.append(_exponent_check("poincare_exponent", report.fit["exponent"], target, block["exponent_tol"]))
        checks.append(make_check("poincare_below_upper", report.sandwiched, True, None, report.sandwiched))

    summary["checks"] = checks
    return summary


command = Command("inequalities", run_inequalities, "Functional-inequality profiles and constants")
