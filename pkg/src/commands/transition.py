"""
transition command: hitting-time study between two minimizers with the
Arrhenius fit, Eyring-Kramers prefactor and exponential-law test.
"""
import math
from typing import Any, Dict

from ..mflab_logging import get_logger
from ..mflab_metastability import transition_study
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check

logger = get_logger("commands.transition")


def run_transition(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    study = transition_study(spec, params["x0"], params["x1"], params["z"], params["delta"], params["N_list"],
                             params["replicas"], dt=params["dt"], seed=seed, horizon=params["horizon"],
                             mode=params["mode"], bias_probe=params["bias_probe"], ks_N=params["ks_N"],
                             ks_samples=params["ks_samples"])
    writer.write_csv("hitting_times.csv", ["N", "replica", "tau"], study.rows())
    writer.write_csv("per_n.csv", ["N", "replicas", "censored", "mean_tau", "stderr", "eyring_kramers", "excluded"],
                     study.per_n_rows())

    summary: Dict[str, Any] = {
        "potential": spec.describe(),
        "mode": study.mode,
        "barrier": study.barrier,
        "eyring_kramers_prefactor": study.ek_prefactor,
        "predictions": {N: {"time": p["time"], "log_time": p["log_time"]} for N, p in study.predictions.items()},
        "means": study.means(),
        "excluded": study.excluded,
        "fit": study.fit,
        "prefactor": study.prefactor,
        "prefactor_fit": study.prefactor_fit,
        "bias_probe": study.bias_probe,
        "ks": study.ks,
        "medians_increasing": study.medians_increasing(),
    }
    checks = [make_check("medians_increasing", study.medians_increasing(), True, None, study.medians_increasing())]
    if study.fit:
        slope, barrier = study.fit["slope"], study.barrier
        tol = params["slope_rtol"] * barrier
        checks.append(make_check("arrhenius_slope", slope, barrier, tol, abs(slope - barrier) <= tol))
    if math.isfinite(study.prefactor):
        lo, hi = params["prefactor_band"]
        ratio = study.prefactor / study.ek_prefactor
        checks.append(make_check("prefactor_ratio", ratio, [lo, hi], None, lo <= ratio <= hi))
    if study.ks is not None:
        stat = study.ks["statistic"]
        checks.append(make_check("exponentiality_ks", stat, 0.0, params["ks_threshold"],
                                 stat < params["ks_threshold"]))
    summary["checks"] = checks
    return summary


command = Command("transition", run_transition, "Metastable transition times and Arrhenius law")
