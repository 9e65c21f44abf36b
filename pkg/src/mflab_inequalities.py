"""
Functional-inequality profiles and constants for confined landscapes.

Tabulates the Lojasiewicz profile Theta_1 and the coercivity profile Phi_1 of
V_kappa on grids, evaluates grid Polyak-Lojasiewicz constants, the closed-form
degenerate log-Sobolev constants, quadrature Poincare lower bounds and the
Curie-Weiss critical-temperature suite.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .mflab_critical_points import CriticalPoint, find_critical_points, seed_grid, critical_temperature
from .mflab_gibbs import (curie_weiss_effective_potential, gibbs_barycenter_variance, nu_moments,
                          stationary_entropy_curie_weiss)
from .mflab_logging import get_logger, NumericError
from .mflab_process import get_pool
from .mflab_validation import ParameterError, optional_box, require_count, require_positive

logger = get_logger("inequalities")

GRADIENT_FLOOR = 1e-14
EXPONENT_SLACK = 0.05
RAY_SAMPLES = 400


class DependencyError(NumericError):
    """Raised when an upstream computation did not deliver what a profile needs."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "DEPENDENCY_ERROR")


class AnalyticError(NumericError):
    """Raised when tabulated input violates an analytic precondition."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "ANALYTIC_ERROR")


# ---------------------------------------------------------------------------
# Power-law fits
# ---------------------------------------------------------------------------

def fit_power_law(x, y, floor: float = 0.0, decade: bool = True, min_points: int = 8) -> Dict[str, Any]:
    """
    Least-squares fit of log y = exponent * log x + log prefactor.

    Args:
        x: Abscissae (positive entries are used)
        y: Ordinates; entries <= floor are ignored
        decade: Restrict to the smallest decade of usable x, widened to min_points
        min_points: Minimum number of points of a decade fit

    Returns:
        Dictionary with exponent, prefactor, residual (rms in log space) and points
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    usable = np.flatnonzero((x > 0) & (y > floor) & np.isfinite(y))
    if decade and usable.size:
        order = usable[np.argsort(x[usable])]
        first = x[order[0]]
        chosen = order[x[order] <= 10.0 * first * (1 + 1e-12)]
        if chosen.size < min_points:
            chosen = order[:min_points]
        usable = chosen
    if usable.size < 2:
        return {"exponent": float("nan"), "prefactor": float("nan"), "residual": float("nan"),
                "points": int(usable.size)}
    lx, ly = np.log(x[usable]), np.log(y[usable])
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return {"exponent": float(slope), "prefactor": float(np.exp(intercept)), "residual": residual,
            "points": int(usable.size)}


# ---------------------------------------------------------------------------
# Lojasiewicz and coercivity profiles
# ---------------------------------------------------------------------------

@dataclass
class InequalityProfile:
    """Tabulated Theta_1, Phi_1 and the monotonized Theta of a landscape."""

    kappa: float
    r: np.ndarray
    theta1: np.ndarray
    phi1: np.ndarray
    theta_tilde: np.ndarray
    theta1_at_zero: float
    theta_fit: Dict[str, Any]
    phi_fit: Dict[str, Any]
    tight: bool
    pl_holds: bool
    minimizers: List[CriticalPoint] = field(default_factory=list)
    critical_points: int = 0
    grid_points: int = 0

    def rows(self) -> List[List[float]]:
        return [[float(a), float(b), float(c), float(e)]
                for a, b, c, e in zip(self.r, self.theta1, self.phi1, self.theta_tilde)]

    def summary(self) -> Dict[str, Any]:
        return {
            "kappa": self.kappa,
            "theta1_at_zero": self.theta1_at_zero,
            "theta_exponent": self.theta_fit["exponent"],
            "theta_fit": self.theta_fit,
            "phi_exponent": self.phi_fit["exponent"],
            "phi_fit": self.phi_fit,
            "tight": self.tight,
            "pl_holds": self.pl_holds,
            "minimizers": [p.location.tolist() for p in self.minimizers],
            "critical_points": self.critical_points,
            "grid_points": self.grid_points,
        }


def _shifted(spec, m: np.ndarray) -> np.ndarray:
    # pca energies carry a constant that would swamp quartic increments
    if hasattr(spec, "shifted_value"):
        return spec.shifted_value(m)
    return spec.value(m)


def _evaluate(spec, points: np.ndarray):
    """Shifted values and squared gradient norms on a point cloud, computed chunkwise over the pool."""
    pool = get_pool()
    results = pool.map(lambda idx: (_shifted(spec, points[idx]),
                                    np.sum(spec.gradient(points[idx]) ** 2, axis=-1)),
                       pool.chunks(len(points)))
    if not results:
        return np.empty(0), np.empty(0)
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def _zoom_points(centers: np.ndarray, half_width: float, levels: int, per_axis: int) -> np.ndarray:
    d = centers.shape[1]
    unit = seed_grid(np.tile([-1.0, 1.0], (d, 1)), per_axis)
    clouds = [c + half_width * 0.5 ** k * unit for c in centers for k in range(1, levels + 1)]
    return np.concatenate(clouds) if clouds else np.empty((0, d))


def _ray_directions(d: int, minimizers: List[CriticalPoint]) -> np.ndarray:
    eye = np.eye(d)
    dirs = [s * e for e in eye for s in (1.0, -1.0)]
    for i in range(d):
        for j in range(i + 1, d):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    dirs.append((si * eye[i] + sj * eye[j]) / np.sqrt(2.0))
    for p in minimizers:
        for v in p.eigenvectors.T:
            dirs.extend([v, -v])
    out: List[np.ndarray] = []
    for v in dirs:
        v = v / np.linalg.norm(v)
        if not any(np.allclose(v, w, atol=1e-10) for w in out):
            out.append(v)
    return np.array(out)


def _nearest_sq_distance(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[..., None, :] - centers
    return np.min(np.sum(diff ** 2, axis=-1), axis=-1)


class _Ray:
    """Samples of one ray m* + t u for the boundary refinement."""

    def __init__(self, spec, center: np.ndarray, direction: np.ndarray, t_max: float, base: float):
        self.spec = spec
        self.center = center
        self.direction = direction
        self.base = base
        self.t = np.concatenate([[0.0], np.geomspace(1e-9 * t_max, t_max, RAY_SAMPLES)])
        pts = center + self.t[:, None] * direction
        values, g2 = _evaluate(spec, pts)
        self.vbar = values - base
        self.g2 = g2

    def point(self, t: float) -> np.ndarray:
        return self.center + t * self.direction

    def grad2(self, t: float) -> float:
        return float(np.sum(self.spec.gradient(self.point(t)) ** 2))

    def vbar_at(self, t: float) -> float:
        return float(_shifted(self.spec, self.point(t)) - self.base)

    def theta_candidate(self, r: float) -> float:
        above = np.flatnonzero(self.g2 > r)
        if above.size == 0:
            return float(np.max(self.vbar))
        j = int(above[0])
        if j == 0:
            return -np.inf
        best = float(np.max(self.vbar[:j]))
        lo, hi = self.t[j - 1], self.t[j]
        f_lo, f_hi = self.grad2(lo) - r, self.grad2(hi) - r
        if f_lo <= 0 < f_hi:
            tc = brentq(lambda s: self.grad2(s) - r, lo, hi, xtol=1e-15 * max(hi, 1e-300),
                        rtol=4 * np.finfo(float).eps)
            best = max(best, self.vbar_at(tc))
        return best

    def phi_candidate(self, r: float, kappa: float, centers: np.ndarray) -> float:
        tr = np.sqrt(2.0 * r / kappa)
        best = np.inf
        if tr <= self.t[-1]:
            pc = self.point(tr)
            if kappa * _nearest_sq_distance(pc[None, :], centers)[0] >= 2.0 * r * (1 - 1e-12):
                best = self.vbar_at(tr)
        tail = self.t >= tr
        if np.any(tail):
            pts = self.center + self.t[tail, None] * self.direction
            ok = kappa * _nearest_sq_distance(pts, centers) >= 2.0 * r
            if np.any(ok):
                best = min(best, float(np.min(self.vbar[tail][ok])))
        return best


def monotonized_theta(r: np.ndarray, theta1: np.ndarray, theta1_at_zero: float, kappa: float) -> np.ndarray:
    """
    Theta(r) = Theta_1(0) + int_0^r max(Theta_1', 1/(2 kappa)) on a tabulated grid.

    Theta(r) - r/(2 kappa) is nondecreasing by construction.
    """
    r = np.asarray(r, dtype=float)
    theta1 = np.asarray(theta1, dtype=float)
    out = np.empty_like(theta1)
    out[0] = max(theta1[0], theta1_at_zero + r[0] / (2 * kappa))
    for k in range(1, len(r)):
        out[k] = out[k - 1] + max(theta1[k] - theta1[k - 1], (r[k] - r[k - 1]) / (2 * kappa))
    return out


def lojasiewicz_profile(spec, grid_box=None, grid_per_axis: int = 9, r_grid=None, zoom_levels: int = 16,
                        zoom_per_axis: int = 9, r_min: float = 1e-10, r_max: float = 1.0,
                        r_points: int = 101) -> InequalityProfile:
    """
    Tabulate Theta_1 and Phi_1 of V_kappa.

    Theta_1(r) is the max of Vbar_kappa = V_kappa - min V_kappa over points with
    |grad V_kappa|^2 <= r; Phi_1(r) is the min of Vbar_kappa over points with
    kappa |m - m*|^2 >= 2 r, m* the nearest global minimizer. Both extrema run
    over a box grid, nested zoom grids around the global minimizers, and rays
    from each minimizer whose constraint crossing is solved by brentq.

    Args:
        spec: Landscape exposing value, gradient, hessian, kappa and d
        grid_box: (d, 2) search box; defaults to the spec's radius
        grid_per_axis: Points per axis of the box grid
        r_grid: Increasing r values; defaults to a geometric grid on [r_min, r_max]
        zoom_levels: Number of nested zoom grids, each halving the width
        zoom_per_axis: Points per axis of each zoom grid

    Returns:
        InequalityProfile

    Raises:
        DependencyError: If no global minimizer is found
    """
    op = "inequalities.lojasiewicz_profile"
    require_count("grid_per_axis", grid_per_axis, op, minimum=2)
    kappa = float(spec.kappa)
    default_radius = spec.default_radius() if hasattr(spec, "default_radius") else 2.0
    box = optional_box(grid_box, spec.d, default_radius, op)
    r = np.geomspace(r_min, r_max, r_points) if r_grid is None else np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ParameterError("r grid must be positive and strictly increasing", op)

    search = find_critical_points(spec, box, grid_per_axis=max(grid_per_axis, 3))
    minimizers = search.global_minimizers()
    if not minimizers:
        raise DependencyError("no global minimizer found in the search box", op)
    centers = np.array([p.location for p in minimizers])
    crit = np.array([p.location for p in search])
    base = float(np.min(_shifted(spec, centers)))
    theta_zero = float(max(np.max(_shifted(spec, crit)) - base, 0.0))
    tight = len(minimizers) == len(search)

    half = 0.5 * float(np.max(box[:, 1] - box[:, 0]))
    points = np.concatenate([seed_grid(box, grid_per_axis), crit,
                             _zoom_points(centers, half, zoom_levels, zoom_per_axis)])
    values, g2 = _evaluate(spec, points)
    vbar = values - base
    logger.info(f"Profiling {spec.kind} on {len(points)} grid points, {len(minimizers)} global minimizer(s)")

    # sup over {g2 <= r}: running max in order of g2
    order = np.argsort(g2, kind="stable")
    run_max = np.maximum.accumulate(vbar[order])
    idx = np.searchsorted(g2[order], r, side="right")
    theta1 = np.where(idx > 0, run_max[np.maximum(idx - 1, 0)], -np.inf)
    theta1 = np.maximum(theta1, theta_zero)

    # inf over {kappa dist^2 >= 2 r}: running min in decreasing order of distance
    reach = kappa * _nearest_sq_distance(points, centers)
    order = np.argsort(-reach, kind="stable")
    run_min = np.minimum.accumulate(vbar[order])
    count = np.searchsorted(-reach[order], -2.0 * r, side="right")
    phi1 = np.where(count > 0, run_min[np.maximum(count - 1, 0)], np.inf)

    directions = _ray_directions(spec.d, minimizers)
    rays = [_Ray(spec, c, u, half, base) for c in centers for u in directions]
    for k, rk in enumerate(r):
        theta1[k] = max(theta1[k], max(ray.theta_candidate(rk) for ray in rays))
        phi1[k] = min(phi1[k], min(ray.phi_candidate(rk, kappa, centers) for ray in rays))

    # sup over growing sets, inf over shrinking sets
    theta1 = np.maximum.accumulate(theta1)
    phi1 = np.minimum.accumulate(phi1[::-1])[::-1]
    theta_tilde = monotonized_theta(r, theta1, theta_zero, kappa)

    theta_fit = fit_power_law(r, theta1 - theta_zero if not tight else theta1)
    phi_fit = fit_power_law(r, phi1)
    pl_holds = bool(tight and theta_fit["exponent"] >= 1.0 - EXPONENT_SLACK)
    logger.info(f"Theta_1 exponent {theta_fit['exponent']:.4f}, Phi_1 exponent {phi_fit['exponent']:.4f}, "
                f"Theta_1(0)={theta_zero:.4g}")
    return InequalityProfile(kappa, r, theta1, phi1, theta_tilde, theta_zero, theta_fit, phi_fit, tight,
                             pl_holds, minimizers, len(search), len(points))


@dataclass
class PLReport:
    constant: Optional[float]
    grid_sup: float
    refined_sup: float
    local_limit: float
    diverges: bool
    non_minimizing: int

    def summary(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def _pl_grid_sup(spec, box: np.ndarray, per_axis: int, base: float) -> float:
    values, g2 = _evaluate(spec, seed_grid(box, per_axis))
    keep = g2 >= GRADIENT_FLOOR
    if not np.any(keep):
        return 0.0
    return float(np.max(2.0 * (values[keep] - base) / g2[keep]))


def _saddle_ratio(spec, point: np.ndarray, eps: float, base: float) -> float:
    probes = point + eps * np.concatenate([np.eye(spec.d), -np.eye(spec.d)])
    values, g2 = _evaluate(spec, probes)
    g2 = np.maximum(g2, GRADIENT_FLOOR)
    return float(np.max(2.0 * (values - base) / g2))


def pl_constant(spec, grid_box=None, grid_per_axis: int = 9) -> PLReport:
    """
    Grid Polyak-Lojasiewicz constant sup 2 Vbar_kappa / |grad V_kappa|^2.

    The sup runs over the box grid, its refinement with 2n - 1 points per
    axis, and the local limit 1/lambda_min(Hess) at each global minimizer.
    It diverges when a non-minimizing critical point makes the ratio blow
    up under zoom, or when a global minimizer is degenerate.

    Returns:
        PLReport; constant is None when diverges is set
    """
    op = "inequalities.pl_constant"
    require_count("grid_per_axis", grid_per_axis, op, minimum=2)
    default_radius = spec.default_radius() if hasattr(spec, "default_radius") else 2.0
    box = optional_box(grid_box, spec.d, default_radius, op)
    search = find_critical_points(spec, box, grid_per_axis=max(grid_per_axis, 3))
    minimizers = search.global_minimizers()
    if not minimizers:
        raise DependencyError("no global minimizer found in the search box", op)
    base = float(np.min(_shifted(spec, np.array([p.location for p in minimizers]))))

    coarse = _pl_grid_sup(spec, box, grid_per_axis, base)
    refined = _pl_grid_sup(spec, box, 2 * grid_per_axis - 1, base)
    lowest = min(float(p.spectrum[0]) for p in minimizers)
    local = 1.0 / lowest if lowest > 1e-10 else float("inf")

    minimizer_ids = {id(p) for p in minimizers}
    others = [p for p in search if id(p) not in minimizer_ids]
    blowup = any(_saddle_ratio(spec, p.location, 1e-3, base) > 10.0 * _saddle_ratio(spec, p.location, 1e-2, base)
                 for p in others)
    diverges = bool(blowup or not np.isfinite(local))
    constant = None if diverges else max(coarse, refined, local)
    if diverges:
        logger.info(f"PL ratio of {spec.kind} diverges ({len(others)} non-minimizing critical point(s))")
    else:
        logger.info(f"PL constant of {spec.kind}: {constant:.6g}")
    return PLReport(constant, coarse, refined, local, diverges, len(others))


# ---------------------------------------------------------------------------
# Closed-form log-Sobolev constants
# ---------------------------------------------------------------------------

@dataclass
class LsiConstantBundle:
    """Explicit log-Sobolev constants for nu_N proportional to exp(-N u) under growth (c1, c2, beta)."""

    c1: float
    c2: float
    beta: float
    d: int
    kappa: float
    N: float
    R: float
    upper_tight: Optional[float]
    rho_R: float
    defective_A: float
    defective_B: float
    theta_constant: Optional[float] = None
    c3: Optional[float] = None
    talagrand_constant: Optional[float] = None
    skipped: Dict[str, str] = field(default_factory=dict)

    @property
    def theta_exponent(self) -> float:
        return self.beta / (2 * self.beta - 2)

    def theta(self, r):
        """Degenerate Lojasiewicz profile C max(r, r^(beta/(2 beta - 2)))."""
        if self.theta_constant is None:
            raise ParameterError(f"degenerate profile unavailable: {self.skipped.get('degenerate_theta')}",
                                 "inequalities.LsiConstantBundle")
        r = np.asarray(r, dtype=float)
        return self.theta_constant * np.maximum(r, r ** self.theta_exponent)

    def tensorized_theta(self, r):
        """sup over s <= r of Theta(s) + (r - s)/(2 kappa)."""
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).ravel()
        top = float(np.max(flat)) if flat.size else 0.0
        if top <= 0:
            return np.zeros_like(r)
        s = np.unique(np.concatenate([[0.0], np.geomspace(1e-16 * top, top, 4000), flat]))
        best = np.maximum.accumulate(self.theta(s) - s / (2 * self.kappa))
        out = flat / (2 * self.kappa) + best[np.searchsorted(s, flat)]
        return out.reshape(r.shape)

    def talagrand_xi(self, r):
        """xi(r) = C' max(r, r^(2/beta))."""
        if self.talagrand_constant is None:
            raise ParameterError(f"Talagrand profile unavailable: {self.skipped.get('talagrand_xi')}",
                                 "inequalities.LsiConstantBundle")
        r = np.asarray(r, dtype=float)
        return self.talagrand_constant * np.maximum(r, r ** (2.0 / self.beta))

    def summary(self) -> Dict[str, Any]:
        return {
            "inputs": {"c1": self.c1, "c2": self.c2, "beta": self.beta, "d": self.d, "kappa": self.kappa,
                       "N": self.N, "R": self.R},
            "upper_tight": self.upper_tight,
            "rho_R": self.rho_R,
            "defective": {"A": self.defective_A, "B": self.defective_B},
            "degenerate_theta": None if self.theta_constant is None else
            {"C": self.theta_constant, "exponent": self.theta_exponent, "c3": self.c3},
            "talagrand_xi": None if self.talagrand_constant is None else
            {"C": self.talagrand_constant, "exponent": 2.0 / self.beta},
            "skipped": dict(self.skipped),
        }


def _degenerate_theta_constant(c2: float, beta: float, d: int):
    c3 = 3 * (1 + 4 * d) / (2 ** (3 - beta) * c2)
    C = max(2 ** (beta + 4) / c2,
            2 ** (4 - beta) * c2,
            np.e * c2 ** (-2 / beta) * c3 ** ((beta - 2) / beta),
            36 / c2 + 2 ** (8 - 2 * beta) * c2 / 3)
    return float(C), float(c3)


def lsi_constant_bundle(c1: float, c2: float, beta: float, d: int = 1, kappa: float = 1.0, N: float = 1.0,
                        R: float = 2.0) -> LsiConstantBundle:
    """
    Evaluate the explicit constants for a potential u with Hess u >= c1 |x|^(beta-2)
    away from 0 and u growing like c2 |x|^beta.

    Args:
        c1, c2: Growth constants with c1 >= c2 > 0
        beta: Growth exponent, at least 2
        d: Dimension
        kappa: Confinement strength used by the tensorized profile
        N: Inverse temperature of nu_N
        R: Radius of the defective criterion

    Returns:
        LsiConstantBundle; pieces whose hypotheses fail are listed in skipped

    Raises:
        ParameterError: Naming the violated hypothesis
    """
    op = "inequalities.lsi_constant_bundle"
    if not c2 > 0:
        raise ParameterError(f"hypothesis c2 > 0 violated (c2 = {c2})", op)
    if c1 < c2:
        raise ParameterError(f"hypothesis c1 >= c2 violated (c1 = {c1}, c2 = {c2})", op)
    if beta < 2:
        raise ParameterError(f"hypothesis beta >= 2 violated (beta = {beta})", op)
    if N < 1:
        raise ParameterError(f"hypothesis N >= 1 violated (N = {N})", op)
    require_count("d", d, op)
    require_positive("kappa", kappa, op)
    require_positive("R", R, op)

    skipped: Dict[str, str] = {}
    upper = None
    if N >= 1.0 / c2:
        upper = float(2 * np.e * (N * c2) ** (-2.0 / beta))
    else:
        skipped["upper_tight"] = f"needs N >= 1/c2 = {1.0 / c2:g}"

    rho = float(min(c1, c2 * (R / 2) ** (beta - 2)) / 3)
    A = 12.0 / rho
    B = float(6 * np.log(1 + 4 * d + 2 * rho * R ** 2) + 0.75 * max(1 + 4 * d, 2 * rho * R ** 2))

    bundle = LsiConstantBundle(float(c1), float(c2), float(beta), int(d), float(kappa), float(N), float(R),
                               upper, rho, A, B, skipped=skipped)
    if beta <= 2:
        skipped["degenerate_theta"] = "needs beta > 2"
    elif N < 3 * (1 + 4 * d) / (8 * c2):
        skipped["degenerate_theta"] = f"needs N >= 3(1+4d)/(8 c2) = {3 * (1 + 4 * d) / (8 * c2):g}"
    else:
        bundle.theta_constant, bundle.c3 = _degenerate_theta_constant(c2, beta, d)
    if bundle.theta_constant is None:
        skipped["talagrand_xi"] = "needs the degenerate profile"
    else:
        r = np.geomspace(1e-12, 1e6, 2000)
        transform = g_and_phi_from_theta(r, bundle.tensorized_theta(r), kappa)
        u = transform.u
        ratio = transform.g_values ** 2 / np.maximum(u, u ** (2.0 / beta))
        bundle.talagrand_constant = float(np.max(ratio))
    logger.info(f"LSI bundle (c1={c1:g}, c2={c2:g}, beta={beta:g}, N={N:g}): upper={upper}, rho_R={rho:.4g}")
    return bundle


# ---------------------------------------------------------------------------
# Theta -> (g, Phi)
# ---------------------------------------------------------------------------

@dataclass
class ThetaTransform:
    """
    g(u) = int_0^u Theta^{-1}(v)^{-1/2} dv tabulated at nodes u, with its
    inverse and Phi(kappa s^2 / 2) = g^{-1}(s).
    """

    kappa: float
    u: np.ndarray
    g_values: np.ndarray
    head_exponent: float
    theta_exponent: float

    def g(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.exp(np.interp(np.log(np.maximum(u, self.u[0])), np.log(self.u), np.log(self.g_values)))
        head = self.g_values[0] * (np.maximum(u, 0.0) / self.u[0]) ** self.head_exponent
        return np.where(u < self.u[0], head, inside)

    def g_inv(self, s):
        s = np.asarray(s, dtype=float)
        inside = np.exp(np.interp(np.log(np.maximum(s, self.g_values[0])), np.log(self.g_values), np.log(self.u)))
        head = self.u[0] * (np.maximum(s, 0.0) / self.g_values[0]) ** (1.0 / self.head_exponent)
        return np.where(s < self.g_values[0], head, inside)

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return self.g_inv(np.sqrt(2.0 * np.maximum(x, 0.0) / self.kappa))

    @property
    def phi_nodes(self) -> np.ndarray:
        return 0.5 * self.kappa * self.g_values ** 2

    def phi_fit(self) -> Dict[str, Any]:
        return fit_power_law(self.phi_nodes, self.u)

    def rows(self) -> List[List[float]]:
        return [[float(a), float(b), float(c)] for a, b, c in zip(self.u, self.g_values, self.phi_nodes)]


def g_and_phi_from_theta(r, theta, kappa: float = 1.0) -> ThetaTransform:
    """
    Build g and Phi from a tabulated nondecreasing Theta with Theta(0) = 0.

    The generalized inverse Theta^{-1}(u) = inf{r : Theta(r) >= u} is
    interpolated log-linearly, which makes each trapezoid segment an exact
    power-law integral. Below the first node the integral uses the fitted
    small-r power law.

    Args:
        r: Increasing abscissae
        theta: Theta(r), nondecreasing
        kappa: Confinement strength in Phi(kappa s^2 / 2) = g^{-1}(s)

    Returns:
        ThetaTransform

    Raises:
        AnalyticError: If Theta(0) != 0, Theta is not monotone or
            Theta^{-1}(u)^{-1/2} is not integrable at 0
    """
    op = "inequalities.g_and_phi_from_theta"
    require_positive("kappa", kappa, op)
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if r.shape != theta.shape or r.ndim != 1 or r.size < 3:
        raise AnalyticError("r and theta must be matching 1-D tables with at least 3 entries", op)
    if np.any(np.diff(r) <= 0):
        raise AnalyticError("r must be strictly increasing", op)
    scale = max(float(np.max(np.abs(theta))), 1.0)
    if np.any(np.diff(theta) < -1e-12 * scale):
        raise AnalyticError("theta must be nondecreasing", op)
    if r[0] == 0.0:
        if abs(theta[0]) > 1e-12 * scale:
            raise AnalyticError(f"theta(0) must vanish, got {theta[0]:g}", op)
        r, theta = r[1:], theta[1:]
    theta = np.maximum.accumulate(theta)
    keep = theta > 0
    r, theta = r[keep], theta[keep]
    if r.size < 3:
        raise AnalyticError("theta vanishes on the whole table", op)

    fit = fit_power_law(r, theta)
    alpha = fit["exponent"]
    if not np.isfinite(alpha) or alpha <= 0.5:
        raise AnalyticError(f"Theta^-1(u)^(-1/2) is not integrable at 0 (small-r exponent {alpha:.4g} <= 1/2)", op)

    # leftmost r at every distinct theta level
    u, first = np.unique(theta, return_index=True)
    inv = r[first]
    f = inv ** -0.5
    head_p = 1.0 - 1.0 / (2.0 * alpha)
    head = u[0] * f[0] / head_p

    ratio = u[1:] / u[:-1]
    q = np.log(f[1:] / f[:-1]) / np.log(ratio)
    seg = np.where(np.abs(q + 1.0) < 1e-12, f[:-1] * u[:-1] * np.log(ratio),
                   f[:-1] * u[:-1] * (ratio ** (q + 1.0) - 1.0) / np.where(np.abs(q + 1.0) < 1e-12, 1.0, q + 1.0))
    g_values = head + np.concatenate([[0.0], np.cumsum(seg)])
    logger.debug(f"g tabulated on {u.size} levels, small-r Theta exponent {alpha:.4f}")
    return ThetaTransform(float(kappa), u, g_values, float(head_p), float(alpha))


# ---------------------------------------------------------------------------
# Poincare lower bound and the Curie-Weiss suite
# ---------------------------------------------------------------------------

@dataclass
class PoincareReport:
    N_list: List[int]
    bounds: List[float]
    fit: Dict[str, Any]
    upper: List[Optional[float]] = field(default_factory=list)

    @property
    def sandwiched(self) -> bool:
        return all(u is None or b <= u for b, u in zip(self.bounds, self.upper))

    def rows(self) -> List[List[Any]]:
        uppers = self.upper or [None] * len(self.N_list)
        return [[n, b, u] for n, b, u in zip(self.N_list, self.bounds, uppers)]


def poincare_lower_bound(u, N_list: Sequence[int], lsi: Optional[Dict[str, float]] = None) -> PoincareReport:
    """
    Lower bounds C_LS(nu_N) >= Var_{nu_N}(x) from the linear test function.

    Args:
        u: One-dimensional potential
        N_list: Inverse temperatures
        lsi: Optional growth constants {c1, c2, beta} for the matching upper bound

    Returns:
        PoincareReport with a log-log fit over all N
    """
    op = "inequalities.poincare_lower_bound"
    if not N_list:
        raise ParameterError("N_list must not be empty", op)
    N_list = [int(require_count("N", n, op)) for n in N_list]
    bounds = []
    for n in N_list:
        moments = nu_moments(u, n, (1, 2))
        bounds.append(float(moments[2] - moments[1] ** 2))
    fit = fit_power_law(np.array(N_list, dtype=float), np.array(bounds), decade=False)
    upper: List[Optional[float]] = []
    if lsi is not None:
        for n in N_list:
            upper.append(lsi_constant_bundle(lsi["c1"], lsi["c2"], lsi["beta"], N=n).upper_tight)
    logger.info(f"Poincare lower bounds over {len(N_list)} N values: exponent {fit['exponent']:.4f}")
    return PoincareReport(N_list, bounds, fit, upper)


def curie_weiss_suite(kappa0: float, N_list: Sequence[int], entropy_N_list: Sequence[int],
                      xi_box: float = 2.0, profile_options: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Critical-temperature checks of the continuous Curie-Weiss model.

    Args:
        kappa0: Interaction strength
        N_list: Particle counts for the log-Sobolev lower-bound scaling
        entropy_N_list: Particle counts for the stationary entropy slope;
            the slope is fitted on the larger half
        xi_box: Half width of the effective-potential profile box

    Returns:
        Report with sigma2_c, lsi_lower_scaling, entropy_slope,
        omega_degeneracy and theta_exponent
    """
    op = "inequalities.curie_weiss_suite"
    require_positive("kappa0", kappa0, op)
    if len(N_list) < 2 or len(entropy_N_list) < 2:
        raise ParameterError("N_list and entropy_N_list need at least two entries", op)
    sigma2_c = critical_temperature(kappa0, xtol=1e-11)
    omega = curie_weiss_effective_potential(sigma2_c, kappa0)

    pool = get_pool()
    N_list = [int(n) for n in N_list]
    lsi_values = pool.map(lambda n: n * gibbs_barycenter_variance(n, sigma2_c, kappa0, omega), N_list)
    lsi_fit = fit_power_law(np.array(N_list, dtype=float), np.array(lsi_values), decade=False)

    entropy_N = sorted(int(n) for n in entropy_N_list)
    entropies = pool.map(lambda n: stationary_entropy_curie_weiss(n, sigma2_c, kappa0, omega), entropy_N)
    upper_half = slice(len(entropy_N) // 2, None)
    slope, intercept = np.polyfit(np.log(entropy_N)[upper_half], np.array(entropies)[upper_half], 1)

    derivs = omega.derivatives_at(0.0)
    xi = np.linspace(-xi_box, xi_box, 81)
    xi = xi[xi != 0.0]
    curvature = omega.hessian(xi[:, None])[:, 0, 0]
    degeneracy = {
        "omega_2_at_0": derivs["omega_2"],
        "omega_4_at_0": derivs["omega_4"],
        "min_omega_2_off_zero": float(np.min(curvature)),
        "degenerate": bool(abs(derivs["omega_2"]) < 1e-4 and derivs["omega_4"] > 0),
        "positive_off_zero": bool(np.all(curvature > 0)),
    }

    options = {"grid_per_axis": 401}
    options.update(profile_options or {})
    profile = lojasiewicz_profile(omega, [[-xi_box, xi_box]], **options)
    logger.info(f"Curie-Weiss suite at kappa0={kappa0:g}: sigma2_c={sigma2_c:.6f}, "
                f"LSI exponent {lsi_fit['exponent']:.4f}, entropy slope {slope:.4f}, "
                f"Theta exponent {profile.theta_fit['exponent']:.4f}")
    return {
        "kappa0": float(kappa0),
        "sigma2_c": sigma2_c,
        "lsi_lower_scaling": {"N_list": N_list, "values": [float(v) for v in lsi_values], "fit": lsi_fit},
        "entropy_slope": {"N_list": entropy_N, "entropies": [float(h) for h in entropies],
                          "slope": float(slope), "intercept": float(intercept)},
        "omega_degeneracy": degeneracy,
        "theta_exponent": profile.theta_fit["exponent"],
        "profile": profile,
    }
