"""
critical-points command: grid-seeded Newton search, checked against the
analytic PCA set and, for Curie-Weiss, the self-consistency fixed points.
"""
from typing import Any, Dict, List

import numpy as np

from ..mflab_critical_points import CriticalPoint, curie_weiss_fixed_points, find_critical_points, pca_critical_set
from ..mflab_logging import get_logger
from ..mflab_process import Command
from ..mflab_reports import ReportWriter, make_check

logger = get_logger("commands.critical_points")

MATCH_TOLERANCE = 1e-8


def _rows(points: List[CriticalPoint], d: int):
    header = (["index", "kind", "value"] + [f"m{j}" for j in range(d)] + [f"eig{j}" for j in range(d)]
              + ["degenerate", "residual"])
    rows = [[i, p.kind, p.value] + list(p.location) + list(p.spectrum) + [int(p.degenerate), p.residual]
            for i, p in enumerate(points)]
    return header, rows


def _match(found: List[CriticalPoint], expected: List[CriticalPoint]) -> Dict[str, float]:
    worst_loc = worst_val = 0.0
    for e in expected:
        dist = [np.linalg.norm(p.location - e.location) for p in found]
        if not dist:
            return {"location": float("inf"), "value": float("inf")}
        k = int(np.argmin(dist))
        worst_loc = max(worst_loc, float(dist[k]))
        worst_val = max(worst_val, abs(found[k].value - e.value))
    return {"location": worst_loc, "value": worst_val}


def run_critical_points(spec, params: Dict[str, Any], seed: int, writer: ReportWriter) -> Dict[str, Any]:
    search = find_critical_points(spec, params["box"], params["grid_per_axis"])
    header, rows = _rows(search.points, spec.d)
    writer.write_csv("critical_points.csv", header, rows)
    summary: Dict[str, Any] = {
        "potential": spec.describe(),
        "count": len(search),
        "seeds": search.seeds,
        "non_converged": search.non_converged,
        "kinds": [p.kind for p in search],
        "global_minimizers": [p.location for p in search.global_minimizers()],
    }
    checks = [make_check("found_minimizer", len(search.minimizers()), ">=1", None, len(search.minimizers()) >= 1)]

    if spec.kind == "pca":
        expected = pca_critical_set(spec.matrix, spec.kappa)
        err = _match(search.points, expected)
        summary["analytic_match"] = err
        checks.append(make_check("pca_count", len(search), len(expected), 0, len(search) == len(expected)))
        checks.append(make_check("pca_locations", err["location"], 0.0, MATCH_TOLERANCE,
                                 err["location"] <= MATCH_TOLERANCE))
        checks.append(make_check("pca_values", err["value"], 0.0, 1e-10, err["value"] <= 1e-10))

    if spec.kind == "curie_weiss":
        report = curie_weiss_fixed_points(spec.sigma2, spec.kappa0, params["fixed_point_grid"])
        writer.write_csv("fixed_points.csv", ["m", "residual"],
                         [[m, r] for m, r in zip(report.fixed_points, report.residuals)])
        summary["fixed_points"] = report.fixed_points
        summary["f_prime_at_zero"] = report.derivative_at_zero
        expected_count = 3 if report.derivative_at_zero > 1 else 1
        checks.append(make_check("fixed_point_count", len(report.fixed_points), expected_count, 0,
                                 len(report.fixed_points) == expected_count))

    summary["checks"] = checks
    logger.info(f"critical-points: {len(search)} point(s) for {spec.kind}")
    return summary


command = Command("critical-points", run_critical_points, "Critical points and their Hessian spectra")
