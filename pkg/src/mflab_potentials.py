"""
Potential landscapes V and their confined versions V_kappa(m) = V(m) + kappa/2 |m|^2.

Every evaluator is vectorized over a batch of points of shape (..., d).
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from .mflab_logging import get_logger, NumericError
from .mflab_validation import ParameterError, as_point, as_batch, require_positive

logger = get_logger("potentials")


class ConstructionError(NumericError):
    """Raised when a localized convexification cannot be built."""

    def __init__(self, message: str, operation: str = "potentials.localized_convexification"):
        super().__init__(message, operation, "CONSTRUCTION_ERROR")


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """
    Descriptor of a potential V, a confinement strength kappa and a dimension d.

    Kinds:
        quadratic: V = 0
        quartic1d: V = x^4/4 - (1+kappa) x^2/2, so V_kappa = x^4/4 - x^2/2
        pca: V(m0, m1) = c - m1.M.m0 + |m1|^2 (m0.M.m0)/2 with c = tr(M)/2, d = 2n
        curie_weiss: V = (x^4/4 - x^2/2 + kappa0 x^2/2)/sigma2 and kappa = kappa0/sigma2
        capped_saddle1d: V_kappa = -lam x^2/2 + c (|x| - a)_+^4
    """

    kind: str
    kappa: float
    d: int = 1
    matrix: Optional[np.ndarray] = None
    sigma2: Optional[float] = None
    kappa0: Optional[float] = None
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        op = "potentials.PotentialSpec"
        require_positive("kappa", self.kappa, op)
        if self.kind == "pca":
            M = np.asarray(self.matrix, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ParameterError(f"pca matrix must be square, got shape {M.shape}", op)
            scale = 1.0 + np.abs(M).max()
            if np.abs(M - M.T).max() > 1e-12 * scale:
                raise ParameterError("pca matrix must be symmetric", op)
            if np.linalg.eigvalsh(M).min() < -1e-12 * scale:
                raise ParameterError("pca matrix must be positive semidefinite", op)
            object.__setattr__(self, "matrix", 0.5 * (M + M.T))
            object.__setattr__(self, "d", 2 * M.shape[0])
        elif self.kind in ("quartic1d", "curie_weiss", "capped_saddle1d"):
            object.__setattr__(self, "d", 1)
        elif self.kind != "quadratic":
            raise ParameterError(f"unknown potential kind {self.kind!r}", op)
        if self.d < 1:
            raise ParameterError("dimension must be at least 1", op)

    # -- V -----------------------------------------------------------------

    @property
    def n(self) -> int:
        """Half dimension of a pca spec."""
        return self.d // 2

    @property
    def offset(self) -> float:
        """Additive constant c of the pca energy (0 for other kinds)."""
        return 0.5 * float(np.trace(self.matrix)) if self.kind == "pca" else 0.0

    def _split(self, m: np.ndarray):
        n = self.n
        return m[..., :n], m[..., n:]

    def v_value(self, m: np.ndarray) -> np.ndarray:
        """V(m) for a batch of points (..., d); returns shape (...)."""
        m = as_batch(m, self.d, "potentials.evaluate")
        x = m[..., 0]
        if self.kind == "quadratic":
            return np.zeros(m.shape[:-1])
        if self.kind == "quartic1d":
            return x ** 4 / 4 - (1 + self.kappa) * x ** 2 / 2
        if self.kind == "curie_weiss":
            return (x ** 4 / 4 - x ** 2 / 2 + self.kappa0 * x ** 2 / 2) / self.sigma2
        if self.kind == "capped_saddle1d":
            p = self.params
            excess = np.maximum(np.abs(x) - p["a"], 0.0)
            return -p["lam"] * x ** 2 / 2 + p["c"] * excess ** 4 - self.kappa * x ** 2 / 2
        return self.offset + self._pca_core(m)

    def _pca_core(self, m: np.ndarray) -> np.ndarray:
        m0, m1 = self._split(m)
        Mm0 = m0 @ self.matrix
        return (-np.einsum("...i,...i->...", m1, Mm0)
                + 0.5 * np.einsum("...i,...i->...", m1, m1) * np.einsum("...i,...i->...", m0, Mm0))

    def v_grad(self, m: np.ndarray) -> np.ndarray:
        """Gradient of V, shape (..., d)."""
        m = as_batch(m, self.d, "potentials.evaluate")
        x = m[..., :1]
        if self.kind == "quadratic":
            return np.zeros_like(m)
        if self.kind == "quartic1d":
            return x ** 3 - (1 + self.kappa) * x
        if self.kind == "curie_weiss":
            return (x ** 3 - x + self.kappa0 * x) / self.sigma2
        if self.kind == "capped_saddle1d":
            p = self.params
            excess = np.maximum(np.abs(x) - p["a"], 0.0)
            return -p["lam"] * x + 4 * p["c"] * excess ** 3 * np.sign(x) - self.kappa * x
        M = self.matrix
        m0, m1 = self._split(m)
        Mm0 = m0 @ M
        Mm1 = m1 @ M
        sq1 = np.einsum("...i,...i->...", m1, m1)[..., None]
        q0 = np.einsum("...i,...i->...", m0, Mm0)[..., None]
        return np.concatenate([-Mm1 + sq1 * Mm0, -Mm0 + q0 * m1], axis=-1)

    def v_hess(self, m: np.ndarray) -> np.ndarray:
        """Hessian of V, shape (..., d, d)."""
        m = as_batch(m, self.d, "potentials.evaluate")
        x = m[..., :1, None]
        if self.kind == "quadratic":
            return np.zeros(m.shape + (self.d,))
        if self.kind == "quartic1d":
            return 3 * x ** 2 - (1 + self.kappa)
        if self.kind == "curie_weiss":
            return (3 * x ** 2 - 1 + self.kappa0) / self.sigma2
        if self.kind == "capped_saddle1d":
            p = self.params
            excess = np.maximum(np.abs(x) - p["a"], 0.0)
            return -p["lam"] + 12 * p["c"] * excess ** 2 - self.kappa
        M = self.matrix
        n = self.n
        m0, m1 = self._split(m)
        Mm0 = m0 @ M
        sq1 = np.einsum("...i,...i->...", m1, m1)[..., None, None]
        q0 = np.einsum("...i,...i->...", m0, Mm0)[..., None, None]
        h00 = sq1 * M
        h01 = -M + 2 * np.einsum("...i,...j->...ij", Mm0, m1)
        h11 = q0 * np.eye(n)
        top = np.concatenate([h00, h01], axis=-1)
        bottom = np.concatenate([np.swapaxes(h01, -1, -2), h11], axis=-1)
        return np.concatenate([top, bottom], axis=-2)

    # -- V_kappa -----------------------------------------------------------

    def value(self, m: np.ndarray) -> np.ndarray:
        m = as_batch(m, self.d, "potentials.evaluate")
        return self.v_value(m) + 0.5 * self.kappa * np.einsum("...i,...i->...", m, m)

    def shifted_value(self, m: np.ndarray) -> np.ndarray:
        """V_kappa(m) minus the pca constant c, summed without adding c."""
        m = as_batch(m, self.d, "potentials.evaluate")
        if self.kind != "pca":
            return self.value(m)
        return self._pca_core(m) + 0.5 * self.kappa * np.einsum("...i,...i->...", m, m)

    def gradient(self, m: np.ndarray) -> np.ndarray:
        m = as_batch(m, self.d, "potentials.evaluate")
        return self.v_grad(m) + self.kappa * m

    def hessian(self, m: np.ndarray) -> np.ndarray:
        m = as_batch(m, self.d, "potentials.evaluate")
        return self.v_hess(m) + self.kappa * np.eye(self.d)

    def default_radius(self) -> float:
        """Radius of a ball containing every critical point of V_kappa."""
        if self.kind == "capped_saddle1d":
            p = self.params
            return p["a"] + (p["lam"] * (p["a"] + 1) / (4 * p["c"])) ** (1 / 3) + 1.0
        if self.kind == "curie_weiss":
            return 3.0
        return 2.0

    def describe(self) -> Dict[str, Any]:
        """Plain description used in report files."""
        out: Dict[str, Any] = {"kind": self.kind, "kappa": self.kappa, "d": self.d}
        if self.kind == "pca":
            out["matrix"] = self.matrix.tolist()
        if self.kind == "curie_weiss":
            out.update(sigma2=self.sigma2, kappa0=self.kappa0)
        out.update(self.params)
        return out


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def quadratic(kappa: float = 1.0, d: int = 1) -> PotentialSpec:
    return PotentialSpec("quadratic", float(kappa), int(d))


def quartic1d(kappa: float = 1.0) -> PotentialSpec:
    return PotentialSpec("quartic1d", float(kappa), 1)


def pca(M, kappa: float) -> PotentialSpec:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return PotentialSpec("pca", float(kappa), 2 * M.shape[0], matrix=M)


def curie_weiss(sigma2: float, kappa0: float) -> PotentialSpec:
    op = "potentials.curie_weiss"
    require_positive("sigma2", sigma2, op)
    if kappa0 is None or kappa0 < 0:
        raise ParameterError(f"kappa0 must be nonnegative, got {kappa0!r}", op)
    if kappa0 == 0:
        raise ParameterError("kappa0 = 0 gives kappa = 0 and no confined potential; "
                             "use curie_weiss_site for the free single-site law", op)
    return PotentialSpec("curie_weiss", kappa0 / sigma2, 1, sigma2=float(sigma2), kappa0=float(kappa0))


def capped_saddle1d(lam: float = 1.0, kappa: float = 1.0, a: float = 1.0, c: float = 1.0) -> PotentialSpec:
    op = "potentials.capped_saddle1d"
    for name, value in (("lam", lam), ("a", a), ("c", c)):
        require_positive(name, value, op)
    return PotentialSpec("capped_saddle1d", float(kappa), 1,
                         params={"lam": float(lam), "a": float(a), "c": float(c)})


def build_spec(block: Dict[str, Any]) -> PotentialSpec:
    """
    Build a PotentialSpec from a validated potential block of an experiment document.

    Args:
        block: Dictionary loaded through PotentialSchema

    Returns:
        PotentialSpec instance
    """
    kind = block["kind"]
    if kind == "quadratic":
        return quadratic(block["kappa"], block.get("d", 1))
    if kind == "quartic1d":
        return quartic1d(block["kappa"])
    if kind == "pca":
        return pca(block["matrix"], block["kappa"])
    if kind == "curie_weiss":
        return curie_weiss(block["sigma2"], block["kappa0"])
    return capped_saddle1d(block["lam"], block["kappa"], block["a"], block["c"])


def evaluate(spec: PotentialSpec, m) -> Dict[str, Any]:
    """
    Evaluate V_kappa, its gradient and its Hessian at one point.

    Args:
        spec: Potential descriptor
        m: Point of dimension spec.d

    Returns:
        Dictionary with value, gradient (d,) and symmetric hessian (d, d)

    Raises:
        InputError: If m has the wrong dimension
    """
    point = as_point(m, spec.d, "potentials.evaluate")
    hess = spec.hessian(point)
    return {
        "value": float(spec.value(point)),
        "gradient": spec.gradient(point),
        "hessian": 0.5 * (hess + hess.T),
    }


# ---------------------------------------------------------------------------
# Property checks
# ---------------------------------------------------------------------------

def check_derivatives(spec, probes: int = 100, seed: int = 0, scale: float = 1.5,
                      step: float = 1e-5) -> Dict[str, Any]:
    """
    Compare analytic derivatives of V_kappa against central differences.

    Args:
        spec: Potential (or localized potential) descriptor
        probes: Number of random probe points
        seed: Seed of the probe generator
        scale: Standard deviation of the probe cloud
        step: Finite-difference step, scaled by 1 + |m|

    Returns:
        Worst relative gradient error, Hessian error and Hessian asymmetry
    """
    rng = np.random.Generator(np.random.Philox(seed))
    points = rng.normal(0.0, scale, size=(probes, spec.d))
    eye = np.eye(spec.d)
    grad_err = 0.0
    hess_err = 0.0
    asym = 0.0
    for m in points:
        h = step * (1.0 + np.linalg.norm(m))
        g = spec.gradient(m)
        H = spec.hessian(m)
        fd_g = np.array([(spec.value(m + h * e) - spec.value(m - h * e)) / (2 * h) for e in eye])
        fd_H = np.stack([(spec.gradient(m + h * e) - spec.gradient(m - h * e)) / (2 * h) for e in eye], axis=-1)
        grad_err = max(grad_err, np.abs(g - fd_g).max() / (1 + np.linalg.norm(g)))
        hess_err = max(hess_err, np.abs(H - fd_H).max() / (1 + np.linalg.norm(g)))
        asym = max(asym, np.abs(H - H.T).max())
    return {
        "probes": probes,
        "gradient_error": float(grad_err),
        "hessian_error": float(hess_err),
        "hessian_asymmetry": float(asym),
        "passed": bool(grad_err <= 1e-6 and hess_err <= 1e-6 and asym <= 1e-12),
    }


def check_coercive(spec, seed: int = 0, radius: float = 1e3) -> Dict[str, Any]:
    """
    Probe-ray falsification test for coercivity of V_kappa.

    Uses the 2d coordinate half-axes plus 8 random directions. The growth
    of a ray is (V_kappa(R u) - V_kappa(0)) / R^2.

    Returns:
        Smallest growth found and whether every ray grows
    """
    rng = np.random.Generator(np.random.Philox(seed))
    eye = np.eye(spec.d)
    random_dirs = rng.normal(size=(8, spec.d))
    random_dirs /= np.linalg.norm(random_dirs, axis=1, keepdims=True)
    dirs = np.concatenate([eye, -eye, random_dirs])
    origin = spec.value(np.zeros(spec.d))
    radii = np.array([radius / 10, radius])
    vals = spec.value(dirs[:, None, :] * radii[None, :, None])
    growth = (vals[:, 1] - origin) / radius ** 2
    increasing = vals[:, 1] > vals[:, 0]
    worst = int(np.argmin(growth))
    return {
        "rays": int(len(dirs)),
        "min_growth": float(growth[worst]),
        "worst_direction": dirs[worst],
        "passed": bool(np.all(growth > 0) and np.all(increasing)),
    }


# ---------------------------------------------------------------------------
# One-dimensional potentials for quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential1D:
    """Scalar potential u with its derivative, vectorized over numpy arrays."""

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    even: bool = False

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))


def monomial(power: int, coefficient: float = 1.0) -> Potential1D:
    """u(x) = coefficient * x^power."""
    return Potential1D(lambda x: coefficient * x ** power,
                       lambda x: coefficient * power * x ** (power - 1),
                       f"{coefficient:g}*x^{power}", even=power % 2 == 0)


def named_1d(name: str) -> Potential1D:
    """The named test potentials: 'quartic' is x^4 and 'quadratic' is x^2/2."""
    if name == "quartic":
        return monomial(4)
    if name == "quadratic":
        return monomial(2, 0.5)
    raise ParameterError(f"unknown 1-D potential {name!r}", "potentials.named_1d")


def potential_1d(spec: PotentialSpec) -> Potential1D:
    """Single-site potential V of a one-dimensional spec as a Potential1D."""
    if spec.d != 1:
        raise ParameterError("a 1-D potential needs d = 1", "potentials.potential_1d")
    return Potential1D(lambda x: spec.v_value(np.asarray(x, dtype=float)[..., None]),
                       lambda x: spec.v_grad(np.asarray(x, dtype=float)[..., None])[..., 0],
                       spec.kind, even=spec.kind != "pca")


def curie_weiss_site(sigma2: float, kappa0: float) -> Potential1D:
    """Curie-Weiss single-site potential (x^4/4 - x^2/2 + kappa0 x^2/2)/sigma2, kappa0 >= 0 allowed."""
    op = "potentials.curie_weiss_site"
    require_positive("sigma2", sigma2, op)
    if kappa0 is None or kappa0 < 0:
        raise ParameterError(f"kappa0 must be nonnegative, got {kappa0!r}", op)
    a = (kappa0 - 1.0) / sigma2
    return Potential1D(lambda x: (x ** 4 / 4) / sigma2 + a * x ** 2 / 2,
                       lambda x: x ** 3 / sigma2 + a * x,
                       "curie_weiss", even=True)


# ---------------------------------------------------------------------------
# Localized convexification
# ---------------------------------------------------------------------------

def _smoothstep(t: np.ndarray):
    """Quintic smoothstep and its first two derivatives on [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    s = t ** 3 * (10 - 15 * t + 6 * t ** 2)
    ds = 30 * t ** 2 * (1 - t) ** 2
    d2s = 60 * t * (1 - t) * (1 - 2 * t)
    return s, ds, d2s


@dataclass(frozen=True, eq=False)
class LocalizedSpec:
    """
    Strongly convex modification of a confined potential around m*.

    Equals base V_kappa exactly on the ball B(m*, delta). The localized
    confined potential is chi (V_kappa - c) + c + L (|m - m*|^2 - delta^2)_+^2
    where c = V_kappa(m*) and chi is a C^2 cutoff equal to 1 on B(m*, delta)
    and 0 outside B(m*, 2 delta).
    """

    base: PotentialSpec
    center: np.ndarray
    radius: float
    stiffness: float
    strong_convexity: float
    identity: bool = False

    @property
    def kappa(self) -> float:
        return self.base.kappa

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def kind(self) -> str:
        return f"localized:{self.base.kind}"

    def _geometry(self, m: np.ndarray):
        u = m - self.center
        r = np.sqrt(np.einsum("...i,...i->...", u, u))
        delta = self.radius
        s, ds, d2s = _smoothstep((r - delta) / delta)
        chi = 1.0 - s
        dchi = -ds / delta
        d2chi = -d2s / delta ** 2
        q = np.maximum(r ** 2 - delta ** 2, 0.0)
        return u, r, chi, dchi, d2chi, q

    def value(self, m: np.ndarray) -> np.ndarray:
        m = as_batch(m, self.d, "potentials.localized")
        base = self.base.value(m)
        if self.identity:
            return base
        u, r, chi, _, _, q = self._geometry(m)
        c = self._c
        modified = chi * (base - c) + c + self.stiffness * q ** 2
        return np.where(r <= self.radius, base, modified)

    def gradient(self, m: np.ndarray) -> np.ndarray:
        m = as_batch(m, self.d, "potentials.localized")
        base_g = self.base.gradient(m)
        if self.identity:
            return base_g
        u, r, chi, dchi, _, q = self._geometry(m)
        w = self.base.value(m) - self._c
        safe_r = np.where(r > 0, r, 1.0)[..., None]
        modified = ((dchi * w)[..., None] * u / safe_r + chi[..., None] * base_g
                    + 4 * self.stiffness * q[..., None] * u)
        return np.where((r <= self.radius)[..., None], base_g, modified)

    def hessian(self, m: np.ndarray) -> np.ndarray:
        m = as_batch(m, self.d, "potentials.localized")
        base_h = self.base.hessian(m)
        if self.identity:
            return base_h
        u, r, chi, dchi, d2chi, q = self._geometry(m)
        w = self.base.value(m) - self._c
        g = self.base.gradient(m)
        safe_r = np.where(r > 0, r, 1.0)
        e = u / safe_r[..., None]
        eye = np.eye(self.d)
        ee = np.einsum("...i,...j->...ij", e, e)
        hess_chi = d2chi[..., None, None] * ee + (dchi / safe_r)[..., None, None] * (eye - ee)
        grad_chi = dchi[..., None] * e
        cross = np.einsum("...i,...j->...ij", grad_chi, g)
        penalty = 4 * self.stiffness * (2 * np.einsum("...i,...j->...ij", u, u) + q[..., None, None] * eye)
        penalty = np.where((q > 0)[..., None, None], penalty, 0.0)
        modified = (hess_chi * w[..., None, None] + cross + np.swapaxes(cross, -1, -2)
                    + chi[..., None, None] * base_h + penalty)
        return np.where((r <= self.radius)[..., None, None], base_h, modified)

    def v_grad(self, m: np.ndarray) -> np.ndarray:
        """Gradient of the localized V = localized V_kappa - kappa/2 |m|^2."""
        m = as_batch(m, self.d, "potentials.localized")
        if self.identity:
            return self.base.v_grad(m)
        r = np.linalg.norm(m - self.center, axis=-1)
        return np.where((r <= self.radius)[..., None], self.base.v_grad(m),
                        self.gradient(m) - self.kappa * m)

    @property
    def _c(self) -> float:
        return float(self.base.value(self.center))

    def describe(self) -> Dict[str, Any]:
        return {
            "base": self.base.describe(),
            "center": self.center.tolist(),
            "radius": self.radius,
            "stiffness": self.stiffness,
            "strong_convexity": self.strong_convexity,
        }


def _scan_points(center: np.ndarray, half_width: float, d: int, budget: int = 40000) -> np.ndarray:
    per_axis = max(5, int(round(budget ** (1.0 / d))))
    if per_axis % 2 == 0:
        per_axis += 1
    axes = [np.linspace(c - half_width, c + half_width, per_axis) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def min_hessian_eigenvalue(spec, points: np.ndarray, chunk: int = 4096) -> float:
    """Smallest Hessian eigenvalue of V_kappa over a set of points."""
    lowest = np.inf
    for start in range(0, len(points), chunk):
        eig = np.linalg.eigvalsh(spec.hessian(points[start:start + chunk]))
        lowest = min(lowest, float(eig[..., 0].min()))
    return lowest


def localized_convexification(base: PotentialSpec, center, radius: float, stiffness: float = 50.0,
                              stiffness_cap: float = 1e6) -> LocalizedSpec:
    """
    Build a strongly convex potential equal to base V_kappa on B(center, radius).

    Args:
        base: Potential to localize
        center: Point m* where the base Hessian is positive definite
        radius: Radius delta of the ball where nothing changes
        stiffness: Initial penalty strength L; doubled until strong convexity holds
        stiffness_cap: Largest L tried

    Returns:
        LocalizedSpec with the achieved strong-convexity constant

    Raises:
        ConstructionError: If the base Hessian is not positive definite on
            B(center, 2 radius) or no L up to the cap gives a convex result
    """
    op = "potentials.localized_convexification"
    center = as_point(center, base.d, op)
    radius = require_positive("radius", radius, op)
    if stiffness < 0:
        raise ParameterError("stiffness must be nonnegative", op)

    if base.kind == "quadratic":
        return LocalizedSpec(base, center, radius, float(stiffness), base.kappa, identity=True)

    points = _scan_points(center, 2 * radius, base.d)
    inside = np.linalg.norm(points - center, axis=-1) <= 2 * radius
    base_min = min_hessian_eigenvalue(base, points[inside])
    if base_min <= 0:
        raise ConstructionError(
            f"base Hessian is not positive definite on B(m*, 2*delta): min eigenvalue {base_min:.3g}", op)

    scan = _scan_points(center, 2.5 * radius, base.d)
    L = max(float(stiffness), 1.0)
    while L <= stiffness_cap:
        candidate = LocalizedSpec(base, center, radius, L, 0.0)
        # outside 2*delta only the penalty remains, convex with modulus >= 12 L delta^2
        lam = min(min_hessian_eigenvalue(candidate, scan), 12 * L * radius ** 2)
        if lam > 0:
            logger.info(f"Localized {base.kind} at {center.tolist()} with L={L:g}, lambda={lam:.4g}")
            return LocalizedSpec(base, center, radius, L, lam)
        logger.debug(f"L={L:g} gives min eigenvalue {lam:.3g}, doubling")
        L *= 2
    raise ConstructionError(f"no stiffness up to {stiffness_cap:g} makes the potential convex", op)
