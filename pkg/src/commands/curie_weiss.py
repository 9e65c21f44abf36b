"""
curie-weiss command: the critical-temperature suite of the continuous
Curie-Weiss model.
"""
from typing import Any, Dict

from ..mflab_inequalities import curie_weiss_suite
from ..mflab_logging import get_logger
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check
from ..mflab_validation import ParameterError

logger = get_logger("commands.curie_weiss")

LSI_EXPONENT = 0.5
ENTROPY_SLOPE = 0.25
THETA_EXPONENT = 2.0 / 3.0


def run_curie_weiss(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    if spec.kind != "curie_weiss":
        raise ParameterError("the curie-weiss command needs a curie_weiss potential", "commands.curie_weiss")
    report = curie_weiss_suite(spec.kappa0, params["N_list"], params["entropy_N_list"])
    lsi, entropy = report["lsi_lower_scaling"], report["entropy_slope"]
    writer.write_csv("lsi_scaling.csv", ["N", "n_times_barycenter_variance"], list(zip(lsi["N_list"], lsi["values"])))
    writer.write_csv("entropy.csv", ["N", "entropy"], list(zip(entropy["N_list"], entropy["entropies"])))
    writer.write_csv("omega_profile.csv", ["r", "theta1", "phi1", "theta_tilde"], report["profile"].rows())

    lo, hi = params["sigma2_band"]
    sigma2_c = report["sigma2_c"]
    exponent = lsi["fit"]["exponent"]
    slope = entropy["slope"]
    theta = report["theta_exponent"]
    degeneracy = report["omega_degeneracy"]
    checks = [
        make_check("sigma2_c", sigma2_c, [lo, hi], None, lo <= sigma2_c <= hi),
        make_check("lsi_lower_exponent", exponent, LSI_EXPONENT, params["lsi_exponent_tol"],
                   abs(exponent - LSI_EXPONENT) <= params["lsi_exponent_tol"]),
        make_check("entropy_slope", slope, ENTROPY_SLOPE, params["entropy_slope_tol"],
                   abs(slope - ENTROPY_SLOPE) <= params["entropy_slope_tol"]),
        make_check("omega_degenerate", degeneracy["omega_2_at_0"], 0.0, 1e-4, degeneracy["degenerate"]),
        make_check("omega_convex_off_zero", degeneracy["min_omega_2_off_zero"], ">0", None,
                   degeneracy["positive_off_zero"]),
        make_check("theta_exponent", theta, THETA_EXPONENT, params["theta_exponent_tol"],
                   abs(theta - THETA_EXPONENT) <= params["theta_exponent_tol"]),
    ]
    summary = {key: value for key, value in report.items() if key != "profile"}
    summary["profile"] = report["profile"].summary()
    summary["checks"] = checks
    return summary


command = Command("curie-weiss", run_curie_weiss, "Curie-Weiss critical-temperature suite")
