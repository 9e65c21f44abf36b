"""
Monte Carlo transition and saddle-exit studies checked against the
Arrhenius law, the Eyring-Kramers prefactor, the exponential law of
transition times and the exit law from an index-1 saddle.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.stats import kstest, ks_2samp, t as student_t

from .mflab_logging import get_logger, NumericError
from .mflab_config import get_lab_config
from .mflab_critical_points import CriticalPoint, classify, damped_newton, find_critical_points
from .mflab_dynamics import (
    NOISE_BUDGET, BallEvent, InitSpec, SimConfig, em_step, noise_block, particle_drift, replica_stream,
    simulate_barycenter_lanes, simulate_particles,
)
from .mflab_measures import GaussianSpec, w2
from .mflab_potentials import LocalizedSpec
from .mflab_process import get_pool
from .mflab_validation import (
    ValidationError, ParameterError, as_point, require_count, require_positive,
)

logger = get_logger("metastability")

MIN_FIT_SAMPLES = 30
MIN_KS_SAMPLES = 200


class GeometryError(NumericError):
    """Raised when the landscape does not have the geometry a study needs."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "GEOMETRY_ERROR")


class PredictionError(NumericError):
    """Raised when the Eyring-Kramers formula does not apply."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "PREDICTION_ERROR")


class CensoringError(ValidationError):
    """Raised when censored samples reach a test that needs complete data."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "CENSORED")


def _refine(spec, point, operation: str) -> CriticalPoint:
    """Polish a critical point with Newton and classify it."""
    start = as_point(point, spec.d, operation)
    X, ok = damped_newton(spec, start[None, :])
    if not ok[0]:
        raise GeometryError(f"no critical point found near {start.tolist()}", operation)
    return classify(spec, X[0])


def _check_minimizer(cp: CriticalPoint, name: str, operation: str, error=GeometryError):
    if cp.degenerate or cp.index != 0:
        raise error(f"{name}={cp.location.tolist()} is not a non-degenerate minimizer "
                    f"(spectrum {cp.spectrum.tolist()})", operation)


def _check_saddle(cp: CriticalPoint, name: str, operation: str, error=GeometryError):
    if cp.degenerate or cp.index != 1:
        raise error(f"{name}={cp.location.tolist()} is not a non-degenerate index-1 saddle "
                    f"(spectrum {cp.spectrum.tolist()})", operation)


# ---------------------------------------------------------------------------
# Eyring-Kramers
# ---------------------------------------------------------------------------

def eyring_kramers_predict(spec, x0, z, N: float) -> Dict[str, Any]:
    """
    Expected transition time from the minimizer x0 over the saddle z.

    (2 pi / lambda1) sqrt(|det Hess V_kappa(z)| / det Hess V_kappa(x0)) exp(N [V_kappa(z) - V_kappa(x0)])

    Args:
        spec: Potential descriptor
        x0: Non-degenerate minimizer (refined by Newton)
        z: Non-degenerate index-1 saddle (refined by Newton)
        N: Number of particles

    Returns:
        Dict with time, log_time, prefactor, barrier, lambda1 and the two spectra

    Raises:
        PredictionError: If either point has the wrong index or a degenerate spectrum
    """
    op = "metastability.eyring_kramers_predict"
    require_positive("N", N, op)
    try:
        cx, cz = _refine(spec, x0, op), _refine(spec, z, op)
    except GeometryError as e:
        raise PredictionError(e.message, op)
    _check_minimizer(cx, "x0", op, PredictionError)
    _check_saddle(cz, "z", op, PredictionError)
    lambda1 = -float(cz.spectrum[0])
    det_saddle = float(np.prod(cz.spectrum))
    det_minimum = float(np.prod(cx.spectrum))
    prefactor = 2 * math.pi / lambda1 * math.sqrt(abs(det_saddle) / det_minimum)
    barrier = cz.value - cx.value
    log_time = math.log(prefactor) + N * barrier
    return {
        "time": math.exp(log_time) if log_time < 700 else math.inf,
        "log_time": log_time,
        "prefactor": prefactor,
        "barrier": barrier,
        "lambda1": lambda1,
        "minimum": cx.location,
        "saddle": cz.location,
        "minimum_spectrum": cx.spectrum,
        "saddle_spectrum": cz.spectrum,
    }


def exponentiality_test(samples, min_samples: int = MIN_KS_SAMPLES) -> Dict[str, float]:
    """
    Two-sided KS test of tau / mean(tau) against Exp(1).

    Raises:
        CensoringError: If some samples are not finite
        ParameterError: With fewer than min_samples samples
    """
    op = "metastability.exponentiality_test"
    samples = np.asarray(samples, dtype=float).ravel()
    if not np.all(np.isfinite(samples)):
        raise CensoringError(f"{int(np.sum(~np.isfinite(samples)))} censored samples present", op)
    if samples.size < min_samples:
        raise ParameterError(f"need at least {min_samples} samples, got {samples.size}", op)
    scaled = samples / samples.mean()
    result = kstest(scaled, "expon")
    return {"statistic": float(result.statistic), "pvalue": float(result.pvalue), "samples": int(samples.size)}


# ---------------------------------------------------------------------------
# Transition study
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class HittingStudy:
    """Hitting times of B(x1, delta) from x0 for a list of N, with the fits."""

    spec: Any
    x0: np.ndarray
    x1: np.ndarray
    z: np.ndarray
    delta: float
    dt: float
    mode: str
    N_list: List[int]
    samples: Dict[int, np.ndarray] = field(default_factory=dict)
    censored: Dict[int, int] = field(default_factory=dict)
    excluded: List[int] = field(default_factory=list)
    predictions: Dict[int, Dict[str, Any]] = field(default_factory=dict)
    fit: Dict[str, float] = field(default_factory=dict)
    prefactor: float = float("nan")
    prefactor_fit: float = float("nan")
    bias_probe: Dict[str, float] = field(default_factory=dict)
    ks: Optional[Dict[str, float]] = None
    ks_N: Optional[int] = None

    @property
    def ek_prefactor(self) -> float:
        return next(iter(self.predictions.values()))["prefactor"]

    @property
    def barrier(self) -> float:
        return next(iter(self.predictions.values()))["barrier"]

    def means(self) -> Dict[int, float]:
        return {N: float(np.mean(s)) for N, s in self.samples.items() if N not in self.excluded}

    def medians_increasing(self) -> bool:
        meds = [float(np.median(self.samples[N])) for N in sorted(self.samples) if N not in self.excluded]
        return bool(np.all(np.diff(meds) > 0))

    def rows(self) -> List[List[Any]]:
        out = []
        for N in sorted(self.samples):
            out.extend([N, i, tau] for i, tau in enumerate(self.samples[N]))
        return out

    def per_n_rows(self) -> List[List[Any]]:
        out = []
        for N in sorted(self.samples):
            s = self.samples[N]
            finite = s[np.isfinite(s)]
            out.append([N, len(s), self.censored.get(N, 0), float(np.mean(finite)) if finite.size else float("nan"),
                        float(np.std(finite, ddof=1) / math.sqrt(finite.size)) if finite.size > 1 else float("nan"),
                        self.predictions[N]["time"], N in self.excluded])
        return out


def fit_arrhenius(N_values: Sequence[float], mean_times: Sequence[float]) -> Dict[str, float]:
    """Least-squares fit of ln(mean tau) = intercept + slope N with a 95% t interval on the slope."""
    x = np.asarray(N_values, dtype=float)
    y = np.log(np.asarray(mean_times, dtype=float))
    A = np.stack([np.ones_like(x), x], axis=-1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    residual = y - A @ coef
    dof = len(x) - 2
    if dof > 0:
        sigma2 = float(residual @ residual) / dof
        stderr = math.sqrt(sigma2 / float(np.sum((x - x.mean()) ** 2)))
        half = float(student_t.ppf(0.975, dof)) * stderr
    else:
        stderr = half = float("nan")
    return {"slope": float(coef[1]), "intercept": float(coef[0]), "stderr": stderr,
            "ci_low": float(coef[1]) - half, "ci_high": float(coef[1]) + half,
            "residual": float(np.sqrt(np.mean(residual ** 2)))}


def _hitting_lanes(spec, N_counts: Dict[int, int], start: np.ndarray, event: BallEvent, dt: float,
                   horizon: float, seed: int, mode: str) -> Dict[int, np.ndarray]:
    """Hitting times per N; lane (N, r) uses the stream keyed by (seed, N, r)."""
    if mode == "reduced":
        sizes = np.concatenate([np.full(c, N) for N, c in N_counts.items()])
        ids = np.concatenate([np.arange(c) for c in N_counts.values()])
        starts = np.tile(start, (len(sizes), 1))
        batch = simulate_barycenter_lanes(spec, sizes, ids, starts, dt, horizon, seed, event)
        return {N: batch.event_times[sizes == N] for N in N_counts}
    out = {}
    for N, count in N_counts.items():
        cfg = SimConfig(spec, int(N), dt, horizon, model="toy", seed=seed, init=InitSpec("point", start), batches=0)
        out[N] = simulate_particles(cfg, replicas=count, event=event, record_path=False).event_times
    return out


def transition_study(spec, x0, x1, z, delta: float, N_list: Sequence[int], replicas: int, dt: float = 1e-3,
                     seed: int = 0, horizon: Optional[float] = None, mode: str = "reduced",
                     bias_probe: float = 0.1, ks_N: Optional[int] = None,
                     ks_samples: int = 1000) -> HittingStudy:
    """
    Hitting times of B(x1, delta) by the barycenter started at x0.

    Args:
        spec: Toy-model potential descriptor
        x0: Starting minimizer
        x1: Target minimizer
        z: Index-1 saddle between them
        delta: Ball radius
        N_list: Particle counts
        replicas: Replicas per N
        dt: Euler-Maruyama step
        seed: Base seed
        horizon: Time cap; defaults to 10 Eyring-Kramers times at the largest N
        mode: 'reduced' (barycenter SDE) or 'particles' (full system)
        bias_probe: Fraction of smallest-N replicas re-run at dt/2
        ks_N: N whose samples get the exponential-law test (topped up to ks_samples)
        ks_samples: Samples wanted at ks_N

    Returns:
        HittingStudy with samples, Arrhenius fit, prefactors, bias probe and KS result

    Raises:
        GeometryError: If x0, x1, z do not form minimizer-saddle-minimizer with disjoint balls
    """
    op = "metastability.transition_study"
    delta = require_positive("delta", delta, op)
    require_count("replicas", replicas, op)
    if dt is None or not dt > 0:
        raise ParameterError("dt must be positive", op)
    if mode not in ("reduced", "particles"):
        raise ParameterError(f"unknown mode {mode!r}", op)
    N_list = sorted(int(require_count("N", N, op)) for N in N_list)

    c0, c1, cz = _refine(spec, x0, op), _refine(spec, x1, op), _refine(spec, z, op)
    _check_minimizer(c0, "x0", op)
    _check_minimizer(c1, "x1", op)
    _check_saddle(cz, "z", op)
    centers = [c0.location, c1.location, cz.location]
    for i in range(3):
        for j in range(i + 1, 3):
            if np.linalg.norm(centers[i] - centers[j]) <= 2 * delta:
                raise GeometryError(f"balls of radius {delta} around {centers[i].tolist()} and "
                                    f"{centers[j].tolist()} intersect", op)
    found = find_critical_points(spec) if spec.d <= 4 else []
    logger.info(f"Transition geometry verified; {len(found)} critical points in the default box")

    predictions = {N: eyring_kramers_predict(spec, c0.location, cz.location, N) for N in N_list}
    if horizon is None:
        horizon = 10.0 * predictions[N_list[-1]]["time"]
    event = BallEvent(c1.location, delta, enter=True, name="hit")

    counts = {N: replicas for N in N_list}
    if ks_N is not None and ks_N in counts:
        counts[ks_N] = max(replicas, int(ks_samples))
    raw = _hitting_lanes(spec, counts, c0.location, event, dt, horizon, seed, mode)

    study = HittingStudy(spec, c0.location, c1.location, cz.location, delta, dt, mode, N_list,
                         predictions=predictions, ks_N=ks_N)
    threshold = get_lab_config().censoring_threshold
    for N in N_list:
        times = raw[N]
        censored = int(np.sum(~np.isfinite(times)))
        study.samples[N] = times
        study.censored[N] = censored
        if censored > threshold * len(times):
            study.excluded.append(N)
            logger.warning(f"N={N}: {censored}/{len(times)} replicas censored at horizon {horizon:.4g}; excluded")
        else:
            logger.info(f"N={N}: mean hitting time {np.mean(times[np.isfinite(times)]):.5g} "
                        f"(Eyring-Kramers {predictions[N]['time']:.5g})")

    usable = [N for N in N_list if N not in study.excluded and np.sum(np.isfinite(study.samples[N])) >= MIN_FIT_SAMPLES]
    if len(usable) >= 2:
        means = [float(np.mean(study.samples[N][np.isfinite(study.samples[N])])) for N in usable]
        study.fit = fit_arrhenius(usable, means)
        N_top = usable[-1]
        study.prefactor = means[-1] / math.exp(N_top * study.barrier)
        study.prefactor_fit = means[-1] / math.exp(N_top * study.fit["slope"])
        logger.info(f"Arrhenius slope {study.fit['slope']:.4f} (barrier {study.barrier:.4f}), "
                    f"prefactor {study.prefactor:.4g} vs {study.ek_prefactor:.4g}")
    else:
        logger.warning("fewer than two usable N values; no Arrhenius fit")

    if bias_probe > 0:
        N0 = N_list[0]
        count = max(1, math.ceil(bias_probe * replicas))
        half = _hitting_lanes(spec, {N0: count}, c0.location, event, dt / 2, horizon, seed, mode)[N0]
        full = study.samples[N0][:count]
        ok = np.isfinite(half) & np.isfinite(full)
        if ok.any():
            base = float(np.mean(full[ok]))
            study.bias_probe = {"N": N0, "replicas": count, "mean_dt": base,
                                "mean_half_dt": float(np.mean(half[ok])),
                                "relative_change": float(np.mean(half[ok])) / base - 1.0}

    if ks_N is not None and ks_N in study.samples:
        times = study.samples[ks_N]
        finite = times[np.isfinite(times)]
        if finite.size == times.size and finite.size >= MIN_KS_SAMPLES:
            study.ks = exponentiality_test(finite)
        else:
            logger.warning(f"exponentiality test at N={ks_N} skipped: {finite.size}/{times.size} usable samples")
    return study


# ---------------------------------------------------------------------------
# Heteroclinic curve and saddle exit
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class HeteroclinicData:
    """Unstable manifold of a saddle up to its exit points from B(z, delta)."""

    z: np.ndarray
    delta: float
    lambda1: float
    v1: np.ndarray
    exits: Dict[int, np.ndarray]
    exit_times: Dict[int, float]
    times: Dict[int, float]
    cauchy: Dict[int, List[List[float]]]
    converged: Dict[int, bool]
    curves: Dict[int, np.ndarray]


def compute_heteroclinic(spec, z, delta: float, u_schedule: Optional[Sequence[float]] = None,
                         eps: float = 1e-6, max_step: float = np.inf, tol: float = 1e-4,
                         t_max: float = 500.0) -> HeteroclinicData:
    """
    Trace both branches of the unstable manifold of z to the sphere of radius delta.

    T_s(u) is the time the descent flow takes from distance u to distance
    delta on branch s; T_s is the limit of T_s(u) + ln(u) / lambda1 as u -> 0,
    taken over a halving schedule until successive values differ by less than tol.

    Raises:
        GeometryError: If z is not a non-degenerate index-1 saddle or a branch never leaves the ball
    """
    op = "metastability.compute_heteroclinic"
    delta = require_positive("delta", delta, op)
    cz = _refine(spec, z, op)
    _check_saddle(cz, "z", op)
    center = cz.location
    lambda1 = -float(cz.spectrum[0])
    v1 = cz.unstable_direction
    v1 = v1 * (1.0 if v1[np.argmax(np.abs(v1))] > 0 else -1.0)
    if u_schedule is None:
        u_schedule = [delta / 2 ** k for k in range(1, 40) if delta / 2 ** k > 20 * eps]

    def leave(t, y):
        return np.linalg.norm(y - center) - delta
    leave.terminal = True
    leave.direction = 1

    exits, exit_times, times, cauchy, converged, curves = {}, {}, {}, {}, {}, {}
    for s in (-1, 1):
        sol = solve_ivp(lambda t, y: -spec.gradient(y), (0.0, t_max), center + s * eps * v1, method="DOP853",
                        rtol=1e-12, atol=1e-14, events=leave, dense_output=True, max_step=max_step)
        if sol.status != 1 or not len(sol.t_events[0]):
            raise GeometryError(f"branch {s:+d} did not leave B(z, {delta}) within t={t_max}", op)
        t_exit = float(sol.t_events[0][0])
        exits[s] = sol.y_events[0][0]
        exit_times[s] = t_exit
        curves[s] = np.column_stack([sol.t, sol.y.T])

        def distance(t, u):
            return np.linalg.norm(sol.sol(t) - center) - u

        history: List[List[float]] = []
        previous = None
        done = False
        for u in u_schedule:
            t_u = brentq(distance, 0.0, t_exit, args=(u,), xtol=1e-14)
            value = (t_exit - t_u) + math.log(u) / lambda1
            history.append([u, value])
            if previous is not None and abs(value - previous) < tol:
                done = True
                break
            previous = value
        times[s] = history[-1][1]
        cauchy[s] = history
        converged[s] = done
        if not done:
            logger.warning(f"branch {s:+d}: T_s(u) + ln(u)/lambda1 not settled to {tol} over the schedule")
    logger.info(f"Heteroclinic at {center.tolist()}: lambda1={lambda1:.6g}, T_-1={times[-1]:.6g}, T_+1={times[1]:.6g}")
    return HeteroclinicData(center, delta, lambda1, v1, exits, exit_times, times, cauchy, converged, curves)


def reference_exit_law(T: Dict[int, float], lambda1: float, samples: int, seed: int = 0) -> Dict[str, np.ndarray]:
    """Samples of T_Q - ln(|Z| / sqrt(2 lambda1)) / lambda1 with Q uniform on {-1, +1} and Z standard normal."""
    op = "metastability.reference_exit_law"
    lambda1 = require_positive("lambda1", lambda1, op)
    samples = require_count("samples", samples, op)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5AD])))
    sides = np.where(rng.integers(0, 2, size=samples) == 1, 1, -1)
    Z = rng.standard_normal(samples)
    shift = np.where(sides == 1, T[1], T[-1])
    values = shift - np.log(np.abs(Z) / math.sqrt(2 * lambda1)) / lambda1
    return {"values": values, "sides": sides, "mean_log_abs_z": float(np.mean(np.log(np.abs(Z))))}


@dataclass(eq=False)
class SaddleExitStudy:
    """Exit times and sides from B(z, delta) per N, compared to the reference law."""

    z: np.ndarray
    delta: float
    lambda1: float
    v1: np.ndarray
    mode: str
    heteroclinic: HeteroclinicData
    reference: Dict[str, Any]
    times: Dict[int, np.ndarray] = field(default_factory=dict)
    sides: Dict[int, np.ndarray] = field(default_factory=dict)
    centered: Dict[int, np.ndarray] = field(default_factory=dict)
    ambiguous: Dict[int, int] = field(default_factory=dict)
    ks: Dict[int, Dict[str, float]] = field(default_factory=dict)
    side_fraction: Dict[int, float] = field(default_factory=dict)
    side_bound: Dict[int, float] = field(default_factory=dict)
    w2: Dict[int, np.ndarray] = field(default_factory=dict)
    excluded: List[int] = field(default_factory=list)

    def rows(self) -> List[List[Any]]:
        out = []
        for N in sorted(self.times):
            w = self.w2.get(N)
            for i, (tau, side, c) in enumerate(zip(self.times[N], self.sides[N], self.centered[N])):
                out.append([N, i, tau, int(side), c, float(w[i]) if w is not None else float("nan")])
        return out


def exit_sides(points: np.ndarray, het: HeteroclinicData):
    """
    Sides sign(v1 . (x - z)) of exit points and the mask of unambiguous exits.

    An exit is unambiguous when it lies strictly closer to the exit point of
    its own side than to the opposite one.

    Returns:
        Tuple (sides, keep) of int and bool arrays of length len(points)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sides = np.where((points - het.z) @ het.v1 >= 0, 1, -1)
    to_plus = np.linalg.norm(points - het.exits[1], axis=-1)
    to_minus = np.linalg.norm(points - het.exits[-1], axis=-1)
    keep = np.where(sides == 1, to_plus < to_minus, to_minus < to_plus)
    return sides, keep


def saddle_exit_study(spec, z, delta: float, N_list: Sequence[int], replicas: int, seed: int = 0,
                      dt: float = 1e-3, mode: str = "reduced", reference_samples: int = 1_000_000,
                      horizon: Optional[float] = None) -> SaddleExitStudy:
    """
    Exit of the barycenter from B(z, delta) when it starts exactly at the saddle z.

    The side of an exit is sign(v1 . (Xbar_tau - z)); centered times
    tau - ln(N/2) / (2 lambda1) are compared with reference_exit_law by a
    two-sample KS test. Exits closer to the opposite side's exit point are
    counted in ambiguous and left out of every statistic. Full-particle runs
    start from a N(z, 1/kappa) cloud shifted to mean z, and also report the
    largest per-coordinate W2 between the exit cloud and N(z_side, 1/kappa).

    Raises:
        GeometryError: If z is not a non-degenerate index-1 saddle
    """
    op = "metastability.saddle_exit_study"
    require_count("replicas", replicas, op)
    if mode not in ("reduced", "particles"):
        raise ParameterError(f"unknown mode {mode!r}", op)
    het = compute_heteroclinic(spec, z, delta)
    lam, v1, center = het.lambda1, het.v1, het.z
    reference = reference_exit_law(het.times, lam, reference_samples, seed)
    study = SaddleExitStudy(center, delta, lam, v1, mode, het, reference)
    event = BallEvent(center, delta, enter=False, name="exit")
    threshold = get_lab_config().censoring_threshold

    for N in sorted(int(require_count("N", n, op)) for n in N_list):
        cap = horizon if horizon is not None else (math.log(N) + 20.0) / lam
        if mode == "reduced":
            batch = simulate_barycenter_lanes(spec, np.full(replicas, N), np.arange(replicas),
                                              np.tile(center, (replicas, 1)), dt, cap, seed, event)
        else:
            cfg = SimConfig(spec, N, dt, cap, model="toy", seed=seed,
                            init=InitSpec("gaussian", center, 1.0 / spec.kappa, recenter=True), batches=0)
            batch = simulate_particles(cfg, replicas=replicas, event=event, record_path=False)
        times = batch.event_times
        censored = int(np.sum(~np.isfinite(times)))
        if censored > threshold * replicas:
            study.excluded.append(N)
            logger.warning(f"N={N}: {censored}/{replicas} replicas never left B(z, {delta}); excluded")
            continue
        finite = np.flatnonzero(np.isfinite(times))
        sides, keep = exit_sides(batch.event_points[finite], het)
        ok = finite[keep]
        sides = sides[keep]
        study.ambiguous[N] = int(np.sum(~keep))
        if study.ambiguous[N]:
            logger.warning(f"N={N}: {study.ambiguous[N]} exit(s) closer to the opposite exit point; dropped")
        if ok.size == 0:
            study.excluded.append(N)
            logger.warning(f"N={N}: no unambiguous exits left; excluded")
            continue
        centered = times[ok] - math.log(N / 2) / (2 * lam)
        study.times[N] = times[ok]
        study.sides[N] = sides
        study.centered[N] = centered
        result = ks_2samp(centered, reference["values"])
        study.ks[N] = {"statistic": float(result.statistic), "pvalue": float(result.pvalue)}
        study.side_fraction[N] = float(np.mean(sides == 1))
        study.side_bound[N] = 3.0 * math.sqrt(1.0 / (4 * ok.size))
        if mode == "particles":
            clouds = batch.terminal[ok]
            scale = 1.0 / spec.kappa

            def exit_w2(k):
                target = het.exits[int(sides[k])]
                return max(w2(clouds[k][:, c:c + 1], GaussianSpec(target[c:c + 1], scale))
                           for c in range(spec.d))

            study.w2[N] = np.array(get_pool().map(exit_w2, range(len(clouds))))
        logger.info(f"N={N}: P(side=+1)={study.side_fraction[N]:.4f}, KS={study.ks[N]['statistic']:.4f}")
    return study


# ---------------------------------------------------------------------------
# Coupled original / localized systems
# ---------------------------------------------------------------------------

def coupled_local_coincidence(spec, localized: LocalizedSpec, N: int, horizon: float, replicas: int,
                              seed: int = 0, dt: float = 1e-3, start=None) -> Dict[str, Any]:
    """
    Drive the toy system for spec and for its localization with the same increments.

    Returns:
        Dict with the fraction of replicas whose paths stay bitwise identical
        up to the horizon, the first divergence times (inf if none) and the
        first exit times of the original barycenter from B(m*, delta)
    """
    op = "metastability.coupled_local_coincidence"
    require_count("N", N, op)
    require_count("replicas", replicas, op)
    if horizon < 0:
        raise ParameterError("horizon must be nonnegative", op)
    center = localized.center
    start = center if start is None else as_point(start, spec.d, op)
    if np.linalg.norm(start - center) >= localized.radius / 2:
        raise ParameterError("the barycenter must start inside B(m*, delta/2)", op)

    steps = int(round(horizon / dt))
    drift_a = particle_drift(spec, "toy")
    drift_b = particle_drift(localized, "toy")
    lane_shape = (N, spec.d)
    block = max(1, min(get_lab_config().block_size, NOISE_BUDGET // max(1, replicas * N * spec.d)))
    gens = [replica_stream(seed, N, r) for r in range(replicas)]
    scale = math.sqrt(2 * dt)

    X = np.tile(start, (replicas, N, 1))
    Y = X.copy()
    active = np.arange(replicas)
    divergence = np.full(replicas, np.inf)
    exits = np.full(replicas, np.inf)
    buffer = None
    pos = size = 0
    for step in range(1, steps + 1):
        if active.size == 0:
            break
        if pos == size:
            size, pos = min(block, steps - step + 1), 0
            buffer = noise_block(gens, active, size, lane_shape)
        noise = scale * buffer[:, pos]
        pos += 1
        X = em_step(drift_a, X, dt, noise)
        Y = em_step(drift_b, Y, dt, noise)
        bary = X.mean(axis=1)
        left = (np.linalg.norm(bary - center, axis=-1) > localized.radius) & ~np.isfinite(exits[active])
        exits[active[left]] = step * dt
        same = np.all((X == Y).reshape(len(active), -1), axis=1)
        if not same.all():
            divergence[active[~same]] = step * dt
            X, Y, buffer, active = X[same], Y[same], buffer[same], active[same]

    identical = ~np.isfinite(divergence)
    fraction = float(np.mean(identical))
    logger.info(f"Coupled coincidence N={N}, delta={localized.radius}: fraction {fraction:.4f}")
    return {"fraction": fraction, "identical": identical, "divergence_times": divergence, "exit_times": exits}
