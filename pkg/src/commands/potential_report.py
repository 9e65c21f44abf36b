"""
potential-report command: derivative and coercivity checks, point evaluations
and the optional localized convexification with its coincidence experiment.
"""
from typing import Any, Dict

import numpy as np

from ..mflab_logging import get_logger
from ..mflab_metastability import coupled_local_coincidence
from ..mflab_potentials import check_coercive, check_derivatives, evaluate, localized_convexification
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check
from ..mflab_validation import InputError

logger = get_logger("commands.potential_report")


def _point_rows(spec, points):
    d = spec.d
    header = ["point"] + [f"m{j}" for j in range(d)] + ["value"] + [f"g{j}" for j in range(d)] + ["hess_min_eig"]
    rows = []
    for i, m in enumerate(points):
        out = evaluate(spec, m)
        rows.append([i] + list(np.asarray(m, dtype=float)) + [out["value"]] + list(out["gradient"])
                    + [float(np.linalg.eigvalsh(out["hessian"])[0])])
    return header, rows


def run_potential_report(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    derivs = check_derivatives(spec, probes=params["probes"], seed=seed)
    coercive = check_coercive(spec, seed=seed)
    checks = [
        make_check("gradient_error", derivs["gradient_error"], 0.0, 1e-6, derivs["gradient_error"] <= 1e-6),
        make_check("hessian_error", derivs["hessian_error"], 0.0, 1e-6, derivs["hessian_error"] <= 1e-6),
        make_check("hessian_asymmetry", derivs["hessian_asymmetry"], 0.0, 1e-12, derivs["hessian_asymmetry"] <= 1e-12),
        make_check("coercive", coercive["min_growth"], ">0", None, coercive["passed"]),
    ]
    summary: Dict[str, Any] = {"potential": spec.describe(), "derivatives": derivs, "coercivity": coercive}

    if params["points"]:
        header, rows = _point_rows(spec, params["points"])
        writer.write_csv("points.csv", header, rows)

    block = params.get("localize")
    if block:
        if block.get("center") is None:
            raise InputError("localize needs a center", "commands.potential_report")
        localized = localized_convexification(spec, block["center"], block["radius"], block["stiffness"],
                                              block["stiffness_cap"])
        local_derivs = check_derivatives(localized, probes=params["probes"], seed=seed)
        summary["localized"] = {**localized.describe(), "derivatives": local_derivs}
        checks.append(make_check("localized_strong_convexity", localized.strong_convexity, ">0", None,
                                 localized.strong_convexity > 0))
        if block.get("coincidence_N"):
            result = coupled_local_coincidence(spec, localized, block["coincidence_N"], block["coincidence_horizon"],
                                               block["coincidence_replicas"], seed=seed, dt=block["coincidence_dt"])
            writer.write_csv("coincidence.csv", ["replica", "divergence_time", "exit_time"],
                             [[i, t, e] for i, (t, e) in enumerate(zip(result["divergence_times"],
                                                                       result["exit_times"]))])
            summary["coincidence"] = {"N": block["coincidence_N"], "fraction": result["fraction"]}
            checks.append(make_check("coincidence_fraction", result["fraction"], block["coincidence_min"], None,
                                     result["fraction"] >= block["coincidence_min"]))

    summary["checks"] = checks
    logger.info(f"Potential report for {spec.kind}: {sum(c['passed'] for c in checks)}/{len(checks)} checks passed")
    return summary


command = Command("potential-report", run_potential_report, "Derivative, coercivity and localization checks")
