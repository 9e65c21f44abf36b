"""
saddle-exit command: exit times and sides from a ball around an index-1
saddle against the heteroclinic reference law.
"""
from typing import Any, Dict

import numpy as np

from ..mflab_logging import get_logger
from ..mflab_metastability import saddle_exit_study
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check

logger = get_logger("commands.saddle_exit")


def run_saddle_exit(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    study = saddle_exit_study(spec, params["z"], params["delta"], params["N_list"], params["replicas"], seed=seed,
                              dt=params["dt"], mode=params["mode"], reference_samples=params["reference_samples"])
    writer.write_csv("exit_times.csv", ["N", "replica", "tau", "side", "centered", "w2"], study.rows())
    het = study.heteroclinic
    writer.write_csv("heteroclinic.csv", ["side", "u", "value"],
                     [[side, u, v] for side in sorted(het.cauchy) for u, v in het.cauchy[side]])

    summary: Dict[str, Any] = {
        "potential": spec.describe(),
        "mode": study.mode,
        "lambda1": study.lambda1,
        "T": {int(s): t for s, t in het.times.items()},
        "heteroclinic_converged": {int(s): c for s, c in het.converged.items()},
        "reference_mean_log_abs_z": study.reference["mean_log_abs_z"],
        "side_fraction": study.side_fraction,
        "ambiguous": study.ambiguous,
        "ks": study.ks,
        "excluded": study.excluded,
    }
    checks = []
    for N in sorted(study.times):
        frac, bound = study.side_fraction[N], study.side_bound[N]
        checks.append(make_check(f"side_balance_N{N}", frac, 0.5, bound, abs(frac - 0.5) <= bound))
        stat = study.ks[N]["statistic"]
        checks.append(make_check(f"exit_law_ks_N{N}", stat, 0.0, params["ks_threshold"],
                                 stat < params["ks_threshold"]))
        if N in study.w2:
            share = float(np.mean(study.w2[N] < params["w2_threshold"]))
            checks.append(make_check(f"exit_cloud_w2_N{N}", share, params["w2_fraction"], None,
                                     share >= params["w2_fraction"]))
    for N in study.excluded:
        checks.append(make_check(f"censoring_N{N}", "excluded", "kept", None, False))
    summary["checks"] = checks
    return summary


command = Command("saddle-exit", run_saddle_exit, "Exit from the neighbourhood of a saddle")
