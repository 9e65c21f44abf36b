"""
Critical points of confined potentials, the PCA critical set and the
Curie-Weiss self-consistency problem.
"""
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .mflab_logging import get_logger, NumericError
from .mflab_potentials import PotentialSpec, pca as pca_spec, curie_weiss as curie_weiss_spec, potential_1d
from .mflab_process import get_pool
from .mflab_validation import ParameterError, InputError, optional_box, require_count, require_positive
from . import mflab_gibbs as gibbs

logger = get_logger("critical_points")

MERGE_RADIUS = 1e-6
MAX_NEWTON_ITERATIONS = 200
MAX_HALVINGS = 40


class SearchError(NumericError):
    """Raised when a root or bracket search fails."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "SEARCH_ERROR")


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    """A critical point of V_kappa with its Hessian spectrum."""

    location: np.ndarray
    value: float
    spectrum: np.ndarray
    index: int
    degenerate: bool
    residual: float
    eigenvectors: np.ndarray

    @property
    def kind(self) -> str:
        if self.degenerate:
            return "degenerate"
        if self.index == 0:
            return "minimizer"
        if self.index == len(self.spectrum):
            return "maximizer"
        return "saddle"

    @property
    def unstable_direction(self) -> np.ndarray:
        """Eigenvector of the lowest Hessian eigenvalue."""
        return self.eigenvectors[:, 0]


@dataclass
class CriticalPointSearch:
    """Result of a grid-seeded Newton search; behaves like a list of points."""

    points: List[CriticalPoint] = field(default_factory=list)
    seeds: int = 0
    non_converged: int = 0

    def __iter__(self) -> Iterator[CriticalPoint]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i) -> CriticalPoint:
        return self.points[i]

    def minimizers(self) -> List[CriticalPoint]:
        return [p for p in self.points if p.index == 0]

    def global_minimizers(self, rtol: float = 1e-9) -> List[CriticalPoint]:
        mins = self.minimizers()
        if not mins:
            return []
        best = min(p.value for p in mins)
        return [p for p in mins if p.value <= best + rtol * (1 + abs(best))]


def eigen_tolerance(spectrum: np.ndarray) -> float:
    return 1e-6 * (1.0 + float(np.abs(spectrum).max()))


def classify(spec, m, value: Optional[float] = None) -> CriticalPoint:
    """
    Classify a point of V_kappa from the eigen-decomposition of its Hessian.

    Args:
        spec: Potential descriptor
        m: Location
        value: Known value of V_kappa at m; evaluated when omitted

    Returns:
        CriticalPoint with sorted spectrum, Morse index and degeneracy flag
    """
    m = np.asarray(m, dtype=float)
    H = spec.hessian(m)
    eig, vecs = np.linalg.eigh(0.5 * (H + H.T))
    tol = eigen_tolerance(eig)
    return CriticalPoint(
        location=m,
        value=float(spec.value(m)) if value is None else float(value),
        spectrum=eig,
        index=int(np.sum(eig < -tol)),
        degenerate=bool(np.any(np.abs(eig) <= tol)),
        residual=float(np.linalg.norm(spec.gradient(m))),
        eigenvectors=vecs,
    )


def _converged(spec, X: np.ndarray) -> np.ndarray:
    res = np.linalg.norm(spec.gradient(X), axis=-1)
    return res <= 1e-10 * (1.0 + np.linalg.norm(X, axis=-1))


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        return -np.linalg.solve(H, g[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return -np.einsum("...ij,...j->...i", np.linalg.pinv(H), g)


def damped_newton(spec, seeds: np.ndarray, max_iter: int = MAX_NEWTON_ITERATIONS):
    """
    Batched Newton iteration on grad V_kappa = 0 with backtracking on |grad|^2.

    Args:
        spec: Potential descriptor
        seeds: Starting points (S, d)
        max_iter: Iteration cap per seed

    Returns:
        Tuple (points, converged mask)
    """
    X = np.array(seeds, dtype=float, copy=True)
    done = _converged(spec, X)
    stalled = np.zeros(len(X), dtype=bool)
    for iteration in range(max_iter):
        active = ~(done | stalled)
        if not active.any():
            break
        Xa = X[active]
        g = spec.gradient(Xa)
        step = _newton_direction(spec.hessian(Xa), g)
        merit = np.einsum("...i,...i->...", g, g)
        t = np.ones(len(Xa))
        accepted = np.zeros(len(Xa), dtype=bool)
        trial = Xa.copy()
        for _ in range(MAX_HALVINGS):
            pending = ~accepted
            if not pending.any():
                break
            cand = Xa[pending] + t[pending, None] * step[pending]
            gc = spec.gradient(cand)
            ok = np.einsum("...i,...i->...", gc, gc) < merit[pending]
            idx = np.flatnonzero(pending)
            trial[idx[ok]] = cand[ok]
            accepted[idx[ok]] = True
            t[idx[~ok]] *= 0.5
        X[active] = trial
        lanes = np.flatnonzero(active)
        stalled[lanes[~accepted]] = True
        done[lanes] = _converged(spec, X[lanes])
    logger.debug(f"Newton finished: {int(done.sum())}/{len(X)} seeds converged")
    return X, done


def _merge(spec, points: np.ndarray) -> List[CriticalPoint]:
    if len(points) == 0:
        return []
    order = np.lexsort(points.T[::-1])
    kept: List[np.ndarray] = []
    for p in points[order]:
        if not any(np.linalg.norm(p - q) <= MERGE_RADIUS for q in kept):
            kept.append(p)
    kept_arr = np.array(kept)
    kept_arr = kept_arr[np.lexsort(kept_arr.T[::-1])]
    return [classify(spec, p) for p in kept_arr]


def seed_grid(box: np.ndarray, grid_per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def find_critical_points(spec: PotentialSpec, search_box=None, grid_per_axis: int = 9) -> CriticalPointSearch:
    """
    Find critical points of V_kappa by damped Newton from a grid of seeds.

    Args:
        spec: Potential descriptor with d <= 4
        search_box: (d, 2) box of [lo, hi] pairs; defaults to the spec's radius
        grid_per_axis: Seeds per axis

    Returns:
        CriticalPointSearch in lexicographic order of location; seeds that
        do not converge are counted, never raised

    Raises:
        InputError: If d > 4 or the box is malformed
    """
    op = "critical_points.find_critical_points"
    if spec.d > 4:
        raise InputError(f"grid seeding supports d <= 4, got d = {spec.d}", op)
    require_count("grid_per_axis", grid_per_axis, op, minimum=2)
    box = optional_box(search_box, spec.d, spec.default_radius(), op)
    seeds = seed_grid(box, grid_per_axis)

    pool = get_pool()
    chunks = pool.chunks(len(seeds))
    results = pool.map(lambda idx: damped_newton(spec, seeds[idx]), chunks)
    X = np.concatenate([r[0] for r in results]) if results else np.empty((0, spec.d))
    ok = np.concatenate([r[1] for r in results]) if results else np.empty(0, dtype=bool)

    non_converged = int(np.sum(~ok))
    if non_converged:
        logger.warning(f"{non_converged} of {len(seeds)} Newton seeds did not converge")
    points = _merge(spec, X[ok])
    logger.info(f"Found {len(points)} critical point(s) of {spec.kind} (d={spec.d})")
    return CriticalPointSearch(points, len(seeds), non_converged)


# ---------------------------------------------------------------------------
# PCA running example
# ---------------------------------------------------------------------------

def pca_critical_value(lam: float, kappa: float, offset: float = 0.0) -> float:
    """V_kappa at sqrt(1 - kappa/lam) (v, v): offset - (lam - kappa)^2 / (2 lam)."""
    return offset - (lam - kappa) ** 2 / (2 * lam)


def pca_critical_set(M, kappa: float) -> List[CriticalPoint]:
    """
    Analytic critical points of the PCA confined potential.

    Returns 0 together with +-sqrt(1 - kappa/lam) (v, v) for every unit
    eigenpair (v, lam) of M with lam > kappa.

    Args:
        M: Symmetric positive semidefinite matrix
        kappa: Confinement strength

    Returns:
        Critical points in lexicographic order of location
    """
    spec = pca_spec(M, kappa)
    lams, vecs = np.linalg.eigh(spec.matrix)
    n = spec.n
    found = [classify(spec, np.zeros(2 * n), spec.offset)]
    for lam, v in zip(lams, vecs.T):
        if lam <= kappa:
            continue
        a = np.sqrt(1.0 - kappa / lam)
        for sign in (1.0, -1.0):
            loc = sign * a * np.concatenate([v, v])
            found.append(classify(spec, loc, pca_critical_value(lam, kappa, spec.offset)))
    found.sort(key=lambda p: tuple(p.location))
    return found


# ---------------------------------------------------------------------------
# Curie-Weiss self-consistency
# ---------------------------------------------------------------------------

@dataclass
class FixedPointReport:
    sigma2: float
    kappa0: float
    fixed_points: List[float]
    derivative_at_zero: float
    residuals: List[float]


def _cw_site(sigma2: float, kappa0: float):
    spec = curie_weiss_spec(sigma2, kappa0)
    return spec, potential_1d(spec)


def curie_weiss_f(m: float, sigma2: float, kappa0: float) -> float:
    """Mean of gamma_m proportional to exp(-V(x) + kappa m x)."""
    spec, site = _cw_site(sigma2, kappa0)
    return gibbs.tilted_measure(site, spec.kappa * m).mean


def curie_weiss_f_prime(m: float, sigma2: float, kappa0: float) -> float:
    """Derivative of the self-consistency map, kappa Var(gamma_m)."""
    spec, site = _cw_site(sigma2, kappa0)
    return spec.kappa * gibbs.tilted_measure(site, spec.kappa * m).variance


def curie_weiss_fixed_points(sigma2: float, kappa0: float, grid_points: int = 801) -> FixedPointReport:
    """
    Solve f(m) = m for the Curie-Weiss self-consistency map.

    The single-site potential is even, so roots are searched on m >= 0 by
    sign-change bracketing and brentq, then mirrored.

    Args:
        sigma2: Temperature
        kappa0: Interaction strength
        grid_points: Bracketing grid size on [-R, R]

    Returns:
        FixedPointReport with sorted fixed points and f'(0)
    """
    op = "critical_points.curie_weiss_fixed_points"
    require_positive("sigma2", sigma2, op)
    require_positive("kappa0", kappa0, op)
    spec, site = _cw_site(sigma2, kappa0)
    kappa = spec.kappa

    def h(m: float) -> float:
        return gibbs.tilted_measure(site, kappa * m).mean - m

    radius = spec.default_radius()
    grid = np.linspace(0.0, radius, grid_points // 2 + 1)
    values = np.array([h(m) for m in grid])
    if values[-1] >= 0:
        raise SearchError(f"f(m) - m does not change sign below m = {radius}", op)

    f0 = kappa * gibbs.tilted_measure(site, 0.0).variance
    positive_roots: List[float] = []
    if f0 > 1.0 and values[1] < 0:
        # the nonzero root lies below the first grid step; h > 0 just right of 0
        eps = grid[1]
        for _ in range(MAX_HALVINGS):
            eps *= 0.5
            if h(eps) > 0:
                positive_roots.append(float(brentq(h, eps, grid[1], xtol=1e-15, rtol=4 * np.finfo(float).eps)))
                break
        else:
            logger.warning(f"Curie-Weiss sigma2={sigma2:g}: f'(0)={f0:.12g} but no positive root above "
                           f"{eps:.3g}")
    for a, b, ha, hb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        # m = 0 is always a root by symmetry; the first interval is handled above
        if a == 0.0:
            continue
        if ha == 0.0:
            positive_roots.append(float(a))
        elif ha * hb < 0:
            positive_roots.append(float(brentq(h, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps)))
    roots = sorted([-r for r in positive_roots] + [0.0] + positive_roots)
    residuals = [abs(h(r)) if r != 0.0 else abs(h(0.0)) for r in roots]
    logger.info(f"Curie-Weiss sigma2={sigma2:g}: {len(roots)} fixed point(s), f'(0)={f0:.6g}")
    return FixedPointReport(float(sigma2), float(kappa0), roots, float(f0), residuals)


def critical_temperature(kappa0: float, xtol: float = 1e-6, bracket: Sequence[float] = (1e-3, 10.0)) -> float:
    """
    Temperature sigma_c^2 at which f'(0) = kappa Var(gamma_0) equals 1.

    Args:
        kappa0: Interaction strength
        xtol: Absolute tolerance in sigma^2
        bracket: Search interval for sigma^2

    Returns:
        sigma_c^2

    Raises:
        SearchError: If f'(0) - 1 has no sign change on the bracket
    """
    op = "critical_points.critical_temperature"
    require_positive("kappa0", kappa0, op)

    def excess(s2: float) -> float:
        return curie_weiss_f_prime(0.0, s2, kappa0) - 1.0

    lo, hi = bracket
    e_lo, e_hi = excess(lo), excess(hi)
    if e_lo * e_hi > 0:
        raise SearchError(f"f'(0) - 1 keeps sign on [{lo:g}, {hi:g}] ({e_lo:.3g}, {e_hi:.3g})", op)
    root = float(brentq(excess, lo, hi, xtol=xtol))
    logger.info(f"Critical temperature for kappa0={kappa0:g}: sigma_c^2={root:.8f}")
    return root
