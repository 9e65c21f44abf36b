"""
One-dimensional quadrature engine for Gibbs measures.

Covers tilted single-site measures, the Curie-Weiss effective potential
omega, the barycenter Gibbs measure nu_N, and the stationary entropy and
barycenter variance of the Curie-Weiss particle system.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .mflab_logging import get_logger, NumericError
from .mflab_config import get_lab_config
from .mflab_measures import Density1D
from .mflab_potentials import Potential1D, curie_weiss as curie_weiss_spec, curie_weiss_site, potential_1d
from .mflab_validation import require_count, require_positive

logger = get_logger("gibbs")

SCAN_POINTS = 2001
MAX_EXPANSIONS = 60
MAX_REFINEMENTS = 6

LogDensity = Callable[[np.ndarray], np.ndarray]


class QuadratureError(NumericError):
    """Raised when a quadrature cannot meet its tail or accuracy target."""

    def __init__(self, message: str, operation: str = "gibbs.quadrature_grid"):
        super().__init__(message, operation, "QUADRATURE_ERROR")


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Composite Gauss-Legendre nodes and weights on a truncation window."""

    nodes: np.ndarray
    weights: np.ndarray
    window: Tuple[float, float]
    panels: int

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def log_integral(self, log_values: np.ndarray, axis: int = -1) -> np.ndarray:
        """log of the integral of exp(log_values) over the grid."""
        return logsumexp(log_values + self.log_weights, axis=axis)

    def probabilities(self, log_values: np.ndarray) -> np.ndarray:
        """Normalized node masses of the density exp(log_values)."""
        lw = log_values + self.log_weights
        return np.exp(lw - logsumexp(lw, axis=-1, keepdims=True))


def _panel_rule(breaks: np.ndarray, nodes_per_panel: int) -> Tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) / 2 + half * t[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def _scan_window(log_density: LogDensity, window: Tuple[float, float], cutoff: float,
                 scan_points: int, op: str):
    lo, hi = window
    for _ in range(MAX_EXPANSIONS):
        x = np.linspace(lo, hi, scan_points)
        lv = np.asarray(log_density(x), dtype=float)
        if not np.all(np.isfinite(lv) | (lv == -np.inf)):
            raise QuadratureError("log density is not finite on the scan window", op)
        peak = lv.max()
        threshold = peak - cutoff
        if lv[0] > threshold or lv[-1] > threshold:
            width = hi - lo
            if lv[0] > threshold:
                lo -= width
            if lv[-1] > threshold:
                hi += width
            continue
        above = np.flatnonzero(lv > threshold)
        i0, i1 = max(above[0] - 1, 0), min(above[-1] + 1, scan_points - 1)
        new_lo, new_hi = x[i0], x[i1]
        if (new_hi - new_lo) >= 0.5 * (hi - lo):
            interior = (lv[1:-1] >= lv[:-2]) & (lv[1:-1] >= lv[2:]) & (lv[1:-1] > threshold)
            peaks = x[1:-1][interior]
            return (new_lo, new_hi), peaks, x, lv
        lo, hi = new_lo, new_hi
    raise QuadratureError(f"could not bracket the density mass within {MAX_EXPANSIONS} window changes", op)


def _tail_mass(log_density: LogDensity, window: Tuple[float, float], log_norm: float) -> float:
    lo, hi = window
    h = 1e-4 * (hi - lo)
    total = 0.0
    for end, outward in ((lo, -1.0), (hi, 1.0)):
        inner = float(log_density(np.array([end - outward * h]))[0])
        at_end = float(log_density(np.array([end]))[0])
        slope = (at_end - inner) / h
        if slope >= 0:
            return np.inf
        total += np.exp(at_end - log_norm) / -slope
    return total


def quadrature_grid(log_density: Union[LogDensity, Sequence[LogDensity]],
                    window: Tuple[float, float] = (-4.0, 4.0),
                    breakpoints: Sequence[float] = (),
                    scan_points: int = SCAN_POINTS,
                    operation: str = "gibbs.quadrature_grid") -> QuadratureGrid:
    """
    Build a truncated composite Gauss-Legendre grid for one or several densities.

    The truncation window keeps every point whose log density is within the
    configured cutoff of its maximum. Panels are split at the local maxima
    of each log density. The rule is accepted when doubling the nodes per
    panel changes every log-partition by less than the configured relative
    tolerance, and when the estimated tail mass outside the window is below
    the configured bound.

    Args:
        log_density: Unnormalized log density, or a sequence of them sharing one grid
        window: Initial scan window
        breakpoints: Extra panel boundaries
        scan_points: Points of the window scan
        operation: Name used in error messages

    Returns:
        QuadratureGrid with the doubled-node rule

    Raises:
        QuadratureError: If the tails do not decay or the rule does not converge
    """
    config = get_lab_config()
    densities = [log_density] if callable(log_density) else list(log_density)

    lo, hi = np.inf, -np.inf
    peaks: List[float] = list(breakpoints)
    for density in densities:
        (a, b), found, _, _ = _scan_window(density, window, config.quadrature_cutoff, scan_points, operation)
        lo, hi = min(lo, a), max(hi, b)
        peaks.extend(found.tolist())

    panels = config.min_panels
    n = config.nodes_per_panel
    for attempt in range(MAX_REFINEMENTS):
        base = np.linspace(lo, hi, panels + 1)
        inner = [p for p in peaks if lo < p < hi]
        breaks = np.unique(np.concatenate([base, inner]))
        coarse_nodes, coarse_w = _panel_rule(breaks, n)
        fine_nodes, fine_w = _panel_rule(breaks, 2 * n)
        worst = 0.0
        log_norms = []
        for density in densities:
            lz1 = logsumexp(density(coarse_nodes) + np.log(coarse_w))
            lz2 = logsumexp(density(fine_nodes) + np.log(fine_w))
            worst = max(worst, abs(np.expm1(lz2 - lz1)))
            log_norms.append(lz2)
        if worst <= config.quadrature_rtol:
            break
        logger.debug(f"{operation}: Richardson defect {worst:.3g} with {panels} panels, refining")
        panels *= 2
    else:
        raise QuadratureError(f"Richardson defect {worst:.3g} above {config.quadrature_rtol:g}", operation)

    for density, lz in zip(densities, log_norms):
        tail = _tail_mass(density, (lo, hi), lz)
        if tail > config.tail_mass_tol:
            raise QuadratureError(f"tail mass {tail:.3g} at truncation exceeds {config.tail_mass_tol:g}", operation)

    return QuadratureGrid(fine_nodes, fine_w, (float(lo), float(hi)), len(breaks) - 1)


# ---------------------------------------------------------------------------
# Tilted measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TiltedMeasure:
    """mu_xi proportional to exp(-V(x) + xi x) represented on a quadrature grid."""

    potential: Potential1D
    xi: float
    grid: QuadratureGrid
    logZ: float
    mean: float
    variance: float

    def log_density(self, x: np.ndarray) -> np.ndarray:
        return -self.potential(x) + self.xi * x - self.logZ

    def density(self) -> Density1D:
        return Density1D(self.grid.nodes, np.exp(self.log_density(self.grid.nodes)),
                         self.grid.weights, normalized=True)

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        p = np.exp(self.log_density(self.grid.nodes)) * self.grid.weights
        return float(np.sum(p * f(self.grid.nodes)))


def tilted_measure(V: Potential1D, xi: float = 0.0, window: Tuple[float, float] = (-4.0, 4.0)) -> TiltedMeasure:
    """
    Quadrature representation of mu_xi proportional to exp(-V(x) + xi x).

    Args:
        V: Coercive one-dimensional potential
        xi: Tilt
        window: Initial scan window

    Returns:
        TiltedMeasure with log-partition, mean and variance
    """
    def log_density(x):
        return -V(x) + xi * x

    grid = quadrature_grid(log_density, window, operation="gibbs.tilted_measure")
    lv = log_density(grid.nodes)
    logZ = float(grid.log_integral(lv))
    p = np.exp(lv - logZ) * grid.weights
    mean = float(np.sum(p * grid.nodes))
    variance = float(np.sum(p * (grid.nodes - mean) ** 2))
    return TiltedMeasure(V, float(xi), grid, logZ, mean, variance)


# ---------------------------------------------------------------------------
# Effective potential
# ---------------------------------------------------------------------------

class EffectivePotential:
    """
    omega(xi) = xi^2 / (2 kappa) - log Z(xi) with Z(xi) = int exp(-V(x) + xi x) dx.

    All tilts share one x-grid covering mu_xi for |xi| <= xi_max, so omega
    is smooth in xi up to rounding. Behaves as a one-dimensional landscape
    with batched value, gradient and hessian over points of shape (..., 1).
    """

    d = 1
    kind = "effective"

    def __init__(self, V: Potential1D, kappa: float, xi_max: Optional[float] = None, chunk: int = 512):
        self.V = V
        self.kappa = float(kappa)
        self.xi_max = float(xi_max) if xi_max is not None else float(np.sqrt(2 * self.kappa * 200.0))
        self.chunk = chunk
        tilts = (-self.xi_max, -0.5 * self.xi_max, 0.0, 0.5 * self.xi_max, self.xi_max)
        self.grid = quadrature_grid([self._tilt(t) for t in tilts], (-4.0, 4.0), breakpoints=(0.0,),
                                    operation="gibbs.EffectivePotential")
        self._log_base = -V(self.grid.nodes) + self.grid.log_weights
        self.even = bool(getattr(V, "even", False))
        logger.debug(f"Effective potential grid: {len(self.grid.nodes)} nodes on {self.grid.window}")

    def _tilt(self, xi: float) -> LogDensity:
        return lambda x: -self.V(x) + xi * x

    def cumulants(self, xi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """log Z(xi), mean and variance of mu_xi, elementwise over xi."""
        xi = np.asarray(xi, dtype=float)
        flat = xi.ravel()
        x = self.grid.nodes
        logZ = np.empty_like(flat)
        mean = np.empty_like(flat)
        var = np.empty_like(flat)
        for start in range(0, flat.size, self.chunk):
            t = flat[start:start + self.chunk, None]
            lw = self._log_base[None, :] + t * x[None, :]
            lz = logsumexp(lw, axis=1)
            p = np.exp(lw - lz[:, None])
            mu = p @ x
            logZ[start:start + self.chunk] = lz
            mean[start:start + self.chunk] = mu
            var[start:start + self.chunk] = p @ (x * x) - mu * mu
        return logZ.reshape(xi.shape), mean.reshape(xi.shape), var.reshape(xi.shape)

    def omega(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return xi ** 2 / (2 * self.kappa) - self.cumulants(xi)[0]

    def __call__(self, xi):
        return self.omega(xi)

    def derivative(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return xi / self.kappa - self.cumulants(xi)[1]

    # batched landscape interface
    def value(self, m) -> np.ndarray:
        return self.omega(np.asarray(m, dtype=float)[..., 0])

    def gradient(self, m) -> np.ndarray:
        return self.derivative(np.asarray(m, dtype=float)[..., 0])[..., None]

    def hessian(self, m) -> np.ndarray:
        xi = np.asarray(m, dtype=float)[..., 0]
        return (1.0 / self.kappa - self.cumulants(xi)[2])[..., None, None]

    def tabulate(self, xi_grid: np.ndarray) -> Dict[str, np.ndarray]:
        """
        omega and its first two derivatives by 5-point central stencils.

        Args:
            xi_grid: Uniform grid of tilts

        Returns:
            Dictionary with xi, omega, omega_1 and omega_2
        """
        xi_grid = np.asarray(xi_grid, dtype=float)
        h = float(xi_grid[1] - xi_grid[0])
        ext = np.concatenate([xi_grid[0] - h * np.arange(2, 0, -1), xi_grid, xi_grid[-1] + h * np.arange(1, 3)])
        w = self.omega(ext)
        fm2, fm1, f0, fp1, fp2 = w[:-4], w[1:-3], w[2:-2], w[3:-1], w[4:]
        d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
        d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)
        return {"xi": xi_grid, "omega": f0, "omega_1": d1, "omega_2": d2}

    def derivatives_at(self, xi0: float = 0.0, h: float = 0.02) -> Dict[str, float]:
        """Stencil estimates of omega'' , omega''' and omega'''' at xi0."""
        pts = xi0 + h * np.arange(-3, 4)
        w = self.omega(pts)
        fm3, fm2, fm1, f0, fp1, fp2, fp3 = w
        second = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h ** 2)
        third = (fm3 - 8 * fm2 + 13 * fm1 - 13 * fp1 + 8 * fp2 - fp3) / (8 * h ** 3)
        fourth = (-fm3 + 12 * fm2 - 39 * fm1 + 56 * f0 - 39 * fp1 + 12 * fp2 - fp3) / (6 * h ** 4)
        return {"omega_2": float(second), "omega_3": float(third), "omega_4": float(fourth)}


def curie_weiss_effective_potential(sigma2: float, kappa0: float, xi_max: Optional[float] = None) -> EffectivePotential:
    spec = curie_weiss_spec(sigma2, kappa0)
    return EffectivePotential(potential_1d(spec), spec.kappa, xi_max)


# ---------------------------------------------------------------------------
# Barycenter Gibbs measure nu_N
# ---------------------------------------------------------------------------

def _minimizer(u, window: Tuple[float, float] = (-4.0, 4.0)) -> float:
    if getattr(u, "even", False):
        return 0.0
    x = np.linspace(window[0], window[1], 4001)
    i = int(np.argmin(u(x)))
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, len(x) - 1)]
    res = minimize_scalar(lambda t: float(u(np.array([t]))[0]), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


def nu_grid(u, N: float, center: Optional[float] = None, scan_points: int = SCAN_POINTS):
    """Quadrature grid and node masses of nu_N proportional to exp(-N u)."""
    c = _minimizer(u) if center is None else float(center)
    u0 = float(u(np.array([c]))[0])

    def log_density(x):
        return -N * (u(x) - u0)

    grid = quadrature_grid(log_density, (c - 4.0, c + 4.0), breakpoints=(c,), scan_points=scan_points,
                           operation="gibbs.nu_moments")
    lv = log_density(grid.nodes)
    return grid, lv, c


def nu_moments(u, N: float, k_list: Sequence[int] = (2,), center: Optional[float] = None) -> Dict[int, float]:
    """
    Centered moments of nu_N proportional to exp(-N u).

    Args:
        u: One-dimensional potential (callable, vectorized)
        N: Inverse temperature
        k_list: Moment orders
        center: Minimizer of u; located by a scan and bounded minimization if omitted

    Returns:
        Mapping k -> int (x - center)^k dnu_N
    """
    require_positive("N", N, "gibbs.nu_moments")
    grid, lv, c = nu_grid(u, N, center)
    p = grid.probabilities(lv)
    return {int(k): float(np.sum(p * (grid.nodes - c) ** k)) for k in k_list}


def nu_log_partition(u, N: float, center: Optional[float] = None, scan_points: int = SCAN_POINTS) -> float:
    """log int exp(-N (u(x) - u(center))) dx."""
    grid, lv, _ = nu_grid(u, N, center, scan_points)
    return float(grid.log_integral(lv))


# ---------------------------------------------------------------------------
# Curie-Weiss stationary quantities
# ---------------------------------------------------------------------------

def stationary_entropy_curie_weiss(N: int, sigma2: float, kappa0: float,
                                   omega: Optional[EffectivePotential] = None) -> float:
    """
    Relative entropy of the symmetric stationary product law against the N-particle Gibbs measure.

    H = ln[sqrt(N / (2 pi kappa)) int exp(-N (omega(xi) - omega(0))) dxi] - kappa/2 Var(rho*)
    with rho* proportional to exp(-V).

    Args:
        N: Particle count
        sigma2: Temperature
        kappa0: Interaction strength
        omega: Precomputed effective potential for (sigma2, kappa0)

    Returns:
        H(rho*^N | mu_inf^N)
    """
    require_count("N", N, "gibbs.stationary_entropy_curie_weiss")
    omega = omega or curie_weiss_effective_potential(sigma2, kappa0)
    kappa = omega.kappa
    log_int = nu_log_partition(omega, N, center=0.0, scan_points=401)
    var0 = float(omega.cumulants(np.array([0.0]))[2][0])
    return float(0.5 * np.log(N / (2 * np.pi * kappa)) + log_int - 0.5 * kappa * var0)


def gibbs_barycenter_variance(N: int, sigma2: float, kappa0: float,
                              omega: Optional[EffectivePotential] = None) -> float:
    """
    Second moment of the barycenter under the N-particle Curie-Weiss Gibbs measure.

    Uses int [Var(mu_xi)/N + mean(mu_xi)^2] nu_N(dxi) with nu_N proportional to exp(-N omega).
    Without interaction (kappa0 = 0) the particles are i.i.d. and the value is Var(rho*)/N.

    Returns:
        int xbar^2 dmu_inf^N
    """
    op = "gibbs.gibbs_barycenter_variance"
    require_count("N", N, op)
    if kappa0 == 0:
        return tilted_measure(curie_weiss_site(sigma2, 0.0), 0.0).variance / N
    omega = omega or curie_weiss_effective_potential(sigma2, kappa0)
    grid, lv, _ = nu_grid(omega, N, center=0.0, scan_points=401)
    p = grid.probabilities(lv)
    _, mean, var = omega.cumulants(grid.nodes)
    return float(np.sum(p * (var / N + mean ** 2)))
