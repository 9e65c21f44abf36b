"""
Gaussian and tabulated one-dimensional measures: Wasserstein distances,
relative entropy, Fisher information and free energies.
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

import numpy as np
import ot
from scipy.stats import norm

from .mflab_logging import get_logger
from .mflab_config import get_lab_config
from .mflab_validation import ValidationError, InputError, require_positive

logger = get_logger("measures")

QUANTILE_POINTS = 4096
LOG_GUARD = 1e-300


class UnsupportedError(ValidationError):
    """Raised for inputs outside the supported measure families."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "UNSUPPORTED")


class CapacityError(ValidationError):
    """Raised when exact assignment would exceed its configured size."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "CAPACITY_ERROR")


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Isotropic Gaussian N(mean, s2 I)."""

    mean: np.ndarray
    s2: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        require_positive("s2", self.s2, "measures.GaussianSpec")

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def gaussian(mean, covariance) -> GaussianSpec:
    """
    Build an isotropic Gaussian from a scalar, diagonal or full covariance.

    Raises:
        UnsupportedError: If the covariance is not a multiple of the identity
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim == 0:
        return GaussianSpec(mean, float(cov))
    if cov.ndim == 1:
        cov = np.diag(cov)
    d = mean.shape[0]
    if cov.shape != (d, d):
        raise InputError(f"covariance shape {cov.shape} does not match dimension {d}", "measures.gaussian")
    s2 = float(cov[0, 0])
    if np.abs(cov - s2 * np.eye(d)).max() > 1e-12 * (1 + abs(s2)):
        raise UnsupportedError("only isotropic Gaussians are supported", "measures.gaussian")
    return GaussianSpec(mean, s2)


@dataclass(frozen=True, eq=False)
class Density1D:
    """
    Tabulated density on a one-dimensional grid.

    Node i carries mass weights[i] * values[i]; the weights are quadrature
    weights (cell widths for finite-volume grids).
    """

    nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        op = "measures.Density1D"
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or values.shape != nodes.shape or weights.shape != nodes.shape:
            raise InputError("nodes, values and weights must be 1-D arrays of equal length", op)
        if np.any(values < 0) or np.any(weights < 0):
            raise InputError("density values and weights must be nonnegative", op)
        if np.any(np.diff(nodes) <= 0):
            raise InputError("nodes must be strictly increasing", op)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_log_values(cls, nodes, weights, log_values) -> "Density1D":
        """Normalized density from unnormalized log values on a quadrature grid."""
        log_values = np.asarray(log_values, dtype=float)
        shift = log_values.max()
        raw = np.exp(log_values - shift)
        total = float(np.sum(np.asarray(weights) * raw))
        return cls(nodes, raw / total, weights, normalized=True)

    @classmethod
    def uniform_cells(cls, edges_lo: float, edges_hi: float, values) -> "Density1D":
        """Cell-centered density on a uniform grid of len(values) cells."""
        values = np.asarray(values, dtype=float)
        h = (edges_hi - edges_lo) / len(values)
        nodes = edges_lo + h * (np.arange(len(values)) + 0.5)
        return cls(nodes, values, np.full(len(values), h))

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.values

    def mass(self) -> float:
        return float(np.sum(self.masses))

    def normalize(self) -> "Density1D":
        """Return a normalized copy; flags normalized=True."""
        total = self.mass()
        if total <= 0:
            raise InputError("density has zero mass", "measures.Density1D.normalize")
        return Density1D(self.nodes, self.values / total, self.weights, normalized=True)

    def expect(self, f_values: np.ndarray) -> float:
        return float(np.sum(self.masses * f_values) / self.mass())

    def mean(self) -> float:
        return self.expect(self.nodes)

    def variance(self) -> float:
        mu = self.mean()
        return self.expect((self.nodes - mu) ** 2)

    def cell_edges(self) -> np.ndarray:
        """Monotone cell edges whose widths are the weights."""
        start = self.nodes[0] - 0.5 * self.weights[0]
        return start + np.concatenate([[0.0], np.cumsum(self.weights)])

    def quantile(self, p: np.ndarray) -> np.ndarray:
        """Quantile function with mass spread uniformly inside each cell."""
        masses = self.masses / self.mass()
        cdf = np.concatenate([[0.0], np.cumsum(masses)])
        cdf[-1] = 1.0
        return np.interp(p, cdf, self.cell_edges())


Measure = Union[GaussianSpec, Density1D, np.ndarray]


# ---------------------------------------------------------------------------
# Entropy and Fisher information
# ---------------------------------------------------------------------------

def gaussian_entropy_fisher(mu: GaussianSpec, rho: GaussianSpec) -> Dict[str, float]:
    """
    Relative entropy H(mu|rho) and Fisher information I(mu|rho) of isotropic Gaussians.

    Args:
        mu: N(m1, s I)
        rho: N(m2, t I)

    Returns:
        Dictionary with H = (d/2)[s/t - 1 - ln(s/t)] + |m1-m2|^2/(2t) and
        I = d s (1/t - 1/s)^2 + |m1-m2|^2/t^2
    """
    op = "measures.gaussian_entropy_fisher"
    for g in (mu, rho):
        if not isinstance(g, GaussianSpec):
            raise UnsupportedError(f"expected GaussianSpec, got {type(g).__name__}", op)
    if mu.d != rho.d:
        raise InputError(f"dimension mismatch {mu.d} vs {rho.d}", op)
    d = mu.d
    s, t = mu.s2, rho.s2
    dm2 = float(np.sum((mu.mean - rho.mean) ** 2))
    ratio = s / t
    H = 0.5 * d * (ratio - 1.0 - np.log(ratio)) + dm2 / (2 * t)
    I = d * s * (1.0 / t - 1.0 / s) ** 2 + dm2 / t ** 2
    return {"H": float(max(H, 0.0)), "I": float(I)}


def density_entropy_fisher(mu: Density1D, log_rho, dlog_rho) -> Dict[str, float]:
    """
    H(mu|rho) and I(mu|rho) by quadrature for a tabulated density mu.

    Args:
        mu: Density on a quadrature grid
        log_rho: Callable returning the normalized log density of rho
        dlog_rho: Callable returning the derivative of log rho

    Returns:
        Dictionary with H and I; the Fisher term differentiates log mu by
        finite differences on the grid
    """
    mu = mu.normalize()
    x = mu.nodes
    log_mu = np.log(np.maximum(mu.values, LOG_GUARD))
    H = float(np.sum(mu.masses * (log_mu - log_rho(x))))
    score = np.gradient(log_mu, x) - dlog_rho(x)
    I = float(np.sum(mu.masses * score ** 2))
    return {"H": H, "I": I}


# ---------------------------------------------------------------------------
# Wasserstein distance
# ---------------------------------------------------------------------------

def _quantiles(m, p: np.ndarray) -> np.ndarray:
    if isinstance(m, GaussianSpec):
        if m.d != 1:
            raise UnsupportedError("quantile coupling needs d = 1", "measures.w2")
        return m.mean[0] + np.sqrt(m.s2) * norm.ppf(p)
    return m.quantile(p)


def _as_samples(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"samples must have shape (n,) or (n, d), got {arr.shape}", "measures.w2")
    return arr


def w2(mu: Measure, nu: Measure) -> float:
    """
    Wasserstein-2 distance between two measures.

    Supported pairs: two Gaussians (closed form), two sample sets (sorted
    coupling in 1-D, exact assignment in d > 1), and any mix of 1-D
    Gaussians and tabulated densities (quantile coupling).

    Raises:
        CapacityError: d > 1 sample sets larger than the assignment capacity
        UnsupportedError: Mixed sample/density inputs
    """
    op = "measures.w2"
    if isinstance(mu, GaussianSpec) and isinstance(nu, GaussianSpec):
        if mu.d != nu.d:
            raise InputError(f"dimension mismatch {mu.d} vs {nu.d}", op)
        dm2 = float(np.sum((mu.mean - nu.mean) ** 2))
        return float(np.sqrt(dm2 + mu.d * (np.sqrt(mu.s2) - np.sqrt(nu.s2)) ** 2))

    tabulated = (GaussianSpec, Density1D)
    if isinstance(mu, tabulated) and isinstance(nu, tabulated):
        p = (np.arange(QUANTILE_POINTS) + 0.5) / QUANTILE_POINTS
        diff = _quantiles(mu, p) - _quantiles(nu, p)
        return float(np.sqrt(np.mean(diff ** 2)))

    if isinstance(mu, tabulated) or isinstance(nu, tabulated):
        samples, other = (nu, mu) if isinstance(mu, tabulated) else (mu, nu)
        x = _as_samples(samples)
        if x.shape[1] != 1:
            raise UnsupportedError("sample sets can be coupled with a tabulated measure only in 1-D", op)
        # the empirical quantile function is a step function with n pieces
        n = len(x)
        points = max(QUANTILE_POINTS, 8 * n)
        p = (np.arange(points) + 0.5) / points
        emp = np.sort(x[:, 0])[np.minimum((p * n).astype(int), n - 1)]
        return float(np.sqrt(np.mean((emp - _quantiles(other, p)) ** 2)))

    x, y = _as_samples(mu), _as_samples(nu)
    if x.shape[1] != y.shape[1]:
        raise InputError(f"dimension mismatch {x.shape[1]} vs {y.shape[1]}", op)
    if x.shape[1] == 1:
        cost = ot.emd2_1d(x[:, 0], y[:, 0])
        return float(np.sqrt(max(cost, 0.0)))
    capacity = get_lab_config().max_assignment_size
    if max(len(x), len(y)) > capacity:
        raise CapacityError(f"exact assignment limited to {capacity} samples, got {max(len(x), len(y))}", op)
    a = np.full(len(x), 1.0 / len(x))
    b = np.full(len(y), 1.0 / len(y))
    cost = ot.emd2(a, b, ot.dist(x, y))
    return float(np.sqrt(max(cost, 0.0)))


# ---------------------------------------------------------------------------
# Free energy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeEnergy:
    value: float
    renormalized: bool = False


def _gaussian_moments(g: GaussianSpec):
    m = float(g.mean[0])
    s = g.s2
    return m, m * m + s, m ** 4 + 6 * m * m * s + 3 * s * s


def free_energy(mu: Union[GaussianSpec, Density1D], spec) -> FreeEnergy:
    """
    Free energy of a measure for the toy model or the Curie-Weiss model.

    Toy model: F(mu) = V(m_mu) + kappa/2 int |x|^2 dmu + int mu ln mu.
    Curie-Weiss: F(mu) = int V dmu - kappa/2 m_mu^2 + int mu ln mu.

    Args:
        mu: Isotropic Gaussian or tabulated density (d = 1 specs only)
        spec: Potential descriptor

    Returns:
        FreeEnergy value; renormalized is set when a density had to be normalized
    """
    op = "measures.free_energy"
    if isinstance(mu, GaussianSpec):
        if mu.d != spec.d:
            raise InputError(f"measure dimension {mu.d} does not match spec dimension {spec.d}", op)
        entropy = -0.5 * mu.d * np.log(2 * np.pi * np.e * mu.s2)
        if spec.kind == "curie_weiss":
            m, x2, x4 = _gaussian_moments(mu)
            energy = (x4 / 4 - x2 / 2 + spec.kappa0 * x2 / 2) / spec.sigma2 - 0.5 * spec.kappa * m * m
        else:
            second = float(np.sum(mu.mean ** 2)) + mu.d * mu.s2
            energy = float(spec.v_value(mu.mean)) + 0.5 * spec.kappa * second
        return FreeEnergy(float(energy + entropy))

    if not isinstance(mu, Density1D):
        raise UnsupportedError(f"free energy of {type(mu).__name__} is not supported", op)
    if spec.d != 1:
        raise UnsupportedError("tabulated densities need a d = 1 potential", op)

    renormalized = abs(mu.mass() - 1.0) > 1e-8
    if renormalized:
        logger.warning(f"free_energy: density mass {mu.mass():.12g} renormalized to 1")
    rho = mu.normalize()
    x = rho.nodes
    m = rho.mean()
    entropy = float(np.sum(rho.masses * np.log(np.maximum(rho.values, LOG_GUARD))))
    if spec.kind == "curie_weiss":
        energy = rho.expect(spec.v_value(x[:, None])) - 0.5 * spec.kappa * m * m
    else:
        energy = float(spec.v_value(np.array([m]))) + 0.5 * spec.kappa * rho.expect(x ** 2)
    return FreeEnergy(float(energy + entropy), renormalized)


def gaussian_free_energy_gap(m, s2: float, spec, v_min: float) -> Dict[str, Any]:
    """
    Free-energy gap and Fisher information to the local equilibrium on the
    isotropic Gaussian family of the toy model.

    Args:
        m: Means, shape (..., d)
        s2: Variances, broadcastable against the batch shape
        spec: Potential descriptor
        v_min: Global minimum of V_kappa

    Returns:
        Dictionary with gap F(mu) - min F and fisher I(mu|Gamma(mu))
    """
    m = np.asarray(m, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    d = spec.d
    ks = spec.kappa * s2
    gap = spec.value(m) - v_min + 0.5 * d * (ks - 1.0 - np.log(ks))
    g = spec.gradient(m)
    fisher = d * s2 * (spec.kappa - 1.0 / s2) ** 2 + np.einsum("...i,...i->...", g, g)
    return {"gap": gap, "fisher": fisher}


def pl_ratio_gaussian_scan(spec, m_grid, s2_grid) -> Dict[str, Any]:
    """
    Supremum of 2 F_bar(mu) / I(mu|Gamma(mu)) over Gaussians N(m, s2 I).

    Args:
        spec: Toy-model potential descriptor
        m_grid: Means, shape (K, d)
        s2_grid: Variances, shape (S,)

    Returns:
        Dictionary with the supremum, its argmax, the variance-only ratios
        at the minimizer and a unique_minimizer flag
    """
    from .mflab_critical_points import find_critical_points

    op = "measures.pl_ratio_gaussian_scan"
    m_grid = np.asarray(m_grid, dtype=float).reshape(-1, spec.d)
    s2_grid = np.asarray(s2_grid, dtype=float)
    if np.any(s2_grid <= 0):
        raise InputError("variances must be positive", op)

    search = find_critical_points(spec)
    global_mins = search.global_minimizers()
    if not global_mins:
        raise ValidationError("no minimizer of V_kappa found", op)
    v_min = global_mins[0].value
    m_star = global_mins[0].location
    unique = len(global_mins) == 1 and len(search.minimizers()) == 1

    parts = gaussian_free_energy_gap(m_grid[:, None, :], s2_grid[None, :], spec, v_min)
    gap, fisher = parts["gap"], parts["fisher"]
    valid = fisher >= 1e-14
    ratio = np.where(valid, 2 * np.maximum(gap, 0.0) / np.where(valid, fisher, 1.0), -np.inf)
    k, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)

    at_min = gaussian_free_energy_gap(m_star[None, :], s2_grid, spec, v_min)
    ok = at_min["fisher"] >= 1e-14
    variance_only = np.where(ok, 2 * at_min["gap"] / np.where(ok, at_min["fisher"], 1.0), np.nan)
    if not unique:
        logger.warning(f"{op}: V_kappa has {len(search.minimizers())} local minimizers; sup is not a PL constant")
    return {
        "sup": float(ratio[k, j]),
        "argmax_m": m_grid[k],
        "argmax_s2": float(s2_grid[j]),
        "variance_only": variance_only,
        "unique_minimizer": bool(unique),
        "v_min": float(v_min),
    }
