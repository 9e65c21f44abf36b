"""
Seeded simulation of the N-particle system, of the reduced barycenter SDE,
and a finite-volume solver for the one-dimensional mean-field Fokker-Planck
equation.

Toy model:        dX_i = -(grad V(Xbar) + kappa X_i) dt + sqrt(2) dB_i
Curie-Weiss:      dX_i = -(V'(X_i) - kappa Xbar) dt + sqrt(2) dB_i
Barycenter (toy): dXbar = -grad V_kappa(Xbar) dt + sqrt(2/N) dB
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import norm

from .mflab_logging import get_logger, NumericError
from .mflab_config import get_lab_config
from .mflab_measures import Density1D, GaussianSpec, UnsupportedError, w2
from .mflab_potentials import quadratic
from .mflab_process import get_pool
from .mflab_reports import read_csv
from .mflab_validation import (
    ValidationError, InputError, as_point, require_count, require_positive,
)

logger = get_logger("dynamics")

MODELS = ("toy", "curie_weiss")
INIT_KINDS = ("point", "gaussian", "file", "cloud")

# doubles drawn per noise block across all lanes of one chunk
NOISE_BUDGET = 1 << 22
NOISE_STREAM = 0
INIT_STREAM = 1


class DivergenceError(NumericError):
    """Raised when a simulated state leaves the divergence threshold."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "DIVERGENCE")


class UnsupportedModelError(ValidationError):
    """Raised when an operation does not support the requested model."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "UNSUPPORTED_MODEL")


class StepSizeError(ValidationError):
    """Raised when a time step is invalid or violates a stability bound."""

    def __init__(self, message: str, operation: str):
        super().__init__(message, operation, "STEP_SIZE")


def replica_stream(seed: int, N: int, replica_id: int, purpose: int = NOISE_STREAM) -> np.random.Generator:
    """Counter-based generator owned by one replica; a pure function of its key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(N), int(replica_id), purpose])))


# ---------------------------------------------------------------------------
# Configuration records
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InitSpec:
    """
    Initial particle cloud descriptor.

    Kinds:
        point: every particle at center
        gaussian: i.i.d. N(center, variance I) from the replica's init stream
        file: CSV with columns x0..x{d-1} and N rows
        cloud: explicit (N, d) array
    recenter shifts the cloud so that its mean is center.
    """

    kind: str = "point"
    center: Optional[Sequence[float]] = None
    variance: float = 0.0
    path: Optional[str] = None
    cloud: Optional[np.ndarray] = None
    recenter: bool = False

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValidationError(f"unknown init kind {self.kind!r}", "dynamics.InitSpec")
        if self.kind == "gaussian" and self.variance < 0:
            raise ValidationError("init variance must be nonnegative", "dynamics.InitSpec")
        if self.kind == "file" and not self.path:
            raise ValidationError("file init needs a path", "dynamics.InitSpec")
        if self.kind == "cloud" and self.cloud is None:
            raise ValidationError("cloud init needs an array", "dynamics.InitSpec")


@dataclass(frozen=True, eq=False)
class SimConfig:
    """One simulation: landscape, model, size, step, horizon and RNG key."""

    spec: Any
    N: int
    dt: float
    horizon: float
    model: Optional[str] = None
    seed: int = 0
    replica_id: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    noise: bool = True
    thin: Optional[int] = None
    burn_in: float = 0.0
    batches: int = 50
    store_states: bool = False
    record_increments: bool = False

    def __post_init__(self):
        op = "dynamics.SimConfig"
        if self.dt is None or not np.isfinite(self.dt) or self.dt <= 0:
            raise StepSizeError(f"dt must be positive, got {self.dt!r}", op)
        require_count("N", self.N, op)
        if self.horizon < 0:
            raise ValidationError("horizon must be nonnegative", op)
        model = self.model or ("curie_weiss" if self.spec.kind == "curie_weiss" else "toy")
        if model not in MODELS:
            raise UnsupportedModelError(f"unknown model {model!r}", op)
        object.__setattr__(self, "model", model)
        if self.burn_in < 0 or self.burn_in > self.horizon:
            raise ValidationError("burn_in must lie in [0, horizon]", op)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def thin_every(self) -> int:
        return int(self.thin) if self.thin else max(1, math.ceil(0.1 / self.dt - 1e-9))

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))


def initial_cloud(cfg: SimConfig, replica_id: int) -> np.ndarray:
    """Initial (N, d) particle cloud of one replica."""
    op = "dynamics.initial_cloud"
    d, N, init = cfg.spec.d, cfg.N, cfg.init
    center = np.zeros(d) if init.center is None else as_point(init.center, d, op)
    if init.kind == "point":
        cloud = np.tile(center, (N, 1))
    elif init.kind == "gaussian":
        rng = replica_stream(cfg.seed, N, replica_id, INIT_STREAM)
        cloud = center + math.sqrt(init.variance) * rng.standard_normal((N, d))
    else:
        if init.kind == "file":
            columns = read_csv(init.path)
            names = [f"x{j}" for j in range(d)]
            missing = [c for c in names if c not in columns]
            if missing:
                raise InputError(f"init file {init.path} lacks columns {missing}", op)
            cloud = np.stack([columns[c] for c in names], axis=-1)
        else:
            cloud = np.asarray(init.cloud, dtype=float).reshape(-1, d)
        if cloud.shape != (N, d):
            raise InputError(f"init cloud has shape {cloud.shape}, expected ({N}, {d})", op)
    if init.recenter:
        cloud = cloud - cloud.mean(axis=0) + center
    return cloud


# ---------------------------------------------------------------------------
# Events and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BallEvent:
    """Entry into (enter=True) or exit from (enter=False) the ball B(center, radius) of the barycenter."""

    center: np.ndarray
    radius: float
    enter: bool = True
    name: str = "hit"

    def satisfied(self, y: np.ndarray) -> np.ndarray:
        dist2 = np.sum((y - self.center) ** 2, axis=-1)
        r2 = self.radius ** 2
        return dist2 < r2 if self.enter else dist2 >= r2

    def crossing(self, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
        """Fraction of the step at which the straight segment y0 -> y1 meets the sphere."""
        delta = y1 - y0
        u = y0 - self.center
        a = np.sum(delta ** 2, axis=-1)
        b = 2.0 * np.sum(u * delta, axis=-1)
        c = np.sum(u ** 2, axis=-1) - self.radius ** 2
        root = np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))
        safe_a = np.where(a > 0, a, 1.0)
        theta = ((-b - root) if self.enter else (-b + root)) / (2 * safe_a)
        return np.clip(np.where(a > 0, theta, 1.0), 0.0, 1.0)


@dataclass(eq=False)
class TrajectoryBatch:
    """
    Outputs of a batch of replicas.

    barycenters and states are thinned; they are NaN after a replica stops
    at its event. Event times are interpolated inside the step that first
    satisfies the event, and inf for replicas that never reach it.
    """

    replica_ids: np.ndarray
    sizes: np.ndarray
    dt: float
    times: np.ndarray
    barycenters: np.ndarray
    terminal: np.ndarray
    steps_taken: np.ndarray
    states: Optional[np.ndarray] = None
    event_name: Optional[str] = None
    event_times: Optional[np.ndarray] = None
    event_points: Optional[np.ndarray] = None
    event_states: Optional[np.ndarray] = None
    second_moment_batches: Optional[np.ndarray] = None
    centered_batches: Optional[np.ndarray] = None
    increments: Optional[np.ndarray] = None

    @property
    def censored(self) -> np.ndarray:
        if self.event_times is None:
            return np.zeros(len(self.replica_ids), dtype=bool)
        return ~np.isfinite(self.event_times)

    def events(self) -> List[Dict[str, Any]]:
        """Event log rows ordered by replica id."""
        if self.event_times is None:
            return []
        rows = []
        for k in np.argsort(self.replica_ids, kind="stable"):
            if np.isfinite(self.event_times[k]):
                rows.append({
                    "replica_id": int(self.replica_ids[k]),
                    "event": self.event_name,
                    "time": float(self.event_times[k]),
                    "payload": " ".join(f"{v:.17g}" for v in self.event_points[k]),
                })
        return rows

    def terminal_moments(self) -> Dict[str, np.ndarray]:
        """Empirical mean and mean squared norm of each replica's final state."""
        if self.terminal.ndim == 3:
            return {"mean": self.terminal.mean(axis=1),
                    "second_moment": np.mean(np.sum(self.terminal ** 2, axis=-1), axis=1)}
        return {"mean": self.terminal.copy(), "second_moment": np.sum(self.terminal ** 2, axis=-1)}

    def ergodic(self) -> Dict[str, Dict[str, float]]:
        """Time averages after burn-in with batch-means standard errors, pooled over replicas."""
        out: Dict[str, Dict[str, float]] = {}
        for name, batches in (("second_moment", self.second_moment_batches),
                              ("centered_variance", self.centered_batches)):
            if batches is None or batches.size == 0:
                continue
            flat = batches.ravel()
            out[name] = {
                "estimate": float(flat.mean()),
                "stderr": float(flat.std(ddof=1) / math.sqrt(flat.size)) if flat.size > 1 else float("nan"),
                "batches": int(flat.size),
            }
        return out


# ---------------------------------------------------------------------------
# Lane engine
# ---------------------------------------------------------------------------

def noise_block(gens: Sequence[np.random.Generator], lanes: np.ndarray, size: int, lane_shape) -> np.ndarray:
    """Next size standard normal increments of each listed lane, shape (lanes, size) + lane_shape."""
    return np.stack([gens[k].standard_normal((size,) + tuple(lane_shape)) for k in lanes])


def em_step(drift: Callable[[np.ndarray], np.ndarray], X: np.ndarray, dt: float,
            noise: Optional[np.ndarray] = None) -> np.ndarray:
    """One Euler-Maruyama step X - dt b(X) + noise."""
    X_new = X - dt * drift(X)
    return X_new if noise is None else X_new + noise


def _run_lanes(drift: Callable[[np.ndarray], np.ndarray], X0: np.ndarray, gens: Sequence[np.random.Generator],
               scale: np.ndarray, dt: float, steps: int, *, event: Optional[BallEvent] = None,
               thin_every: int = 1, record_path: bool = True, store_states: bool = False,
               burn_steps: int = 0, batches: int = 0, record_increments: bool = False,
               replay: Optional[np.ndarray] = None, noise: bool = True,
               operation: str = "dynamics.simulate_particles") -> Dict[str, Any]:
    """
    Euler-Maruyama on a stack of independent lanes.

    A lane state is (N, d) for particle systems and (d,) for the reduced
    SDE. Lane k draws its Gaussian increments from gens[k] in step-major,
    particle order, so its path does not depend on which other lanes
    share the stack.
    """
    config = get_lab_config()
    threshold = config.divergence_threshold
    full = X0.ndim == 3
    K = X0.shape[0]
    d = X0.shape[-1]
    N = X0.shape[1] if full else 1
    lane_shape = X0.shape[1:]
    lane_size = int(np.prod(lane_shape))
    block = max(1, min(config.block_size, NOISE_BUDGET // max(1, K * lane_size)))
    broadcast = (-1,) + (1,) * len(lane_shape)

    def bary(X):
        return X.mean(axis=1) if full else X

    T = steps // thin_every + 1 if record_path else 1
    path = np.full((K, T, d), np.nan)
    states = np.full((K, T) + lane_shape, np.nan) if store_states else None
    terminal = np.array(X0, dtype=float, copy=True)
    steps_taken = np.zeros(K, dtype=int)
    event_times = np.full(K, np.inf)
    event_points = np.full((K, d), np.nan)
    event_states = np.full((K, d), np.nan)
    increments = np.zeros((K, steps, d)) if record_increments else None

    post = steps - burn_steps
    batch_len = post // batches if batches and post >= batches else 0
    second_sums = np.zeros((K, batches)) if batch_len else None
    centered_sums = np.zeros((K, batches)) if batch_len and full else None

    active = np.arange(K)
    X = np.array(X0, dtype=float, copy=True)
    Y = bary(X)
    path[:, 0] = Y
    if store_states:
        states[:, 0] = X

    def finish(mask, step, X_now, Y_prev, Y_now):
        lanes = active[mask]
        theta = event.crossing(Y_prev[mask], Y_now[mask]) if step > 0 else np.zeros(mask.sum())
        event_times[lanes] = (step - 1 + theta) * dt if step > 0 else 0.0
        event_points[lanes] = Y_prev[mask] + theta[:, None] * (Y_now[mask] - Y_prev[mask])
        event_states[lanes] = Y_now[mask]
        terminal[lanes] = X_now[mask]
        steps_taken[lanes] = step

    if event is not None:
        hit = event.satisfied(Y)
        if hit.any():
            finish(hit, 0, X, Y, Y)
            X, Y, active = X[~hit], Y[~hit], active[~hit]

    buffer: Optional[np.ndarray] = None
    pos = size = 0
    step = 0
    for step in range(1, steps + 1):
        if active.size == 0:
            break
        if pos == size:
            size = min(block, steps - step + 1)
            pos = 0
            if replay is not None:
                buffer = replay[active, step - 1:step - 1 + size]
            elif noise:
                buffer = noise_block(gens, active, size, lane_shape)
        G = buffer[:, pos] if buffer is not None else None
        X_new = em_step(drift, X, dt, None if G is None else scale[active].reshape(broadcast) * G)
        if G is not None and record_increments:
            increments[active, step - 1] = G.sum(axis=1) / math.sqrt(N) if full else G
        pos += 1

        peak = np.max(np.abs(X_new))
        if not peak <= threshold:
            flat = np.abs(X_new).reshape(len(active), -1)
            bad = ~(flat <= threshold).all(axis=1)
            lane = int(active[np.argmax(bad)])
            raise DivergenceError(
                f"state magnitude {peak:.3g} exceeded {threshold:.3g} at step {step} "
                f"(t={step * dt:.6g}) in lane {lane}", operation)

        Y_new = bary(X_new)
        if batch_len and step > burn_steps:
            b = (step - burn_steps - 1) // batch_len
            if b < batches:
                second_sums[active, b] += np.mean((X_new ** 2).reshape(len(active), -1), axis=1)
                if centered_sums is not None:
                    centered = X_new - Y_new[:, None, :]
                    centered_sums[active, b] += np.mean((centered ** 2).reshape(len(active), -1), axis=1)
        if record_path and step % thin_every == 0:
            path[active, step // thin_every] = Y_new
            if store_states:
                states[active, step // thin_every] = X_new
        if event is not None:
            hit = event.satisfied(Y_new)
            if hit.any():
                finish(hit, step, X_new, Y, Y_new)
                keep = ~hit
                X_new, Y_new, active = X_new[keep], Y_new[keep], active[keep]
                if buffer is not None:
                    buffer = buffer[keep]
        X, Y = X_new, Y_new

    terminal[active] = X
    steps_taken[active] = step if steps else 0
    return {
        "path": path, "states": states, "terminal": terminal, "steps_taken": steps_taken,
        "event_times": event_times, "event_points": event_points, "event_states": event_states,
        "second": second_sums / batch_len if batch_len else None,
        "centered": centered_sums / batch_len if centered_sums is not None else None,
        "increments": increments,
    }


def _run_chunked(drift, X0: np.ndarray, gens, scale: np.ndarray, replay: Optional[np.ndarray],
                 **kwargs) -> Dict[str, Any]:
    """Split lanes over the replica pool; results are concatenated in lane order."""
    pool = get_pool()
    chunks = pool.chunks(len(X0))

    def work(idx):
        lane_replay = None if replay is None else replay[idx]
        return _run_lanes(drift, X0[idx], [gens[i] for i in idx], scale[idx], replay=lane_replay, **kwargs)

    parts = pool.map(work, chunks)
    merged: Dict[str, Any] = {}
    for key in parts[0]:
        values = [p[key] for p in parts]
        merged[key] = None if values[0] is None else np.concatenate(values, axis=0)
    return merged


def _batch(result: Dict[str, Any], replica_ids, sizes, dt: float, thin_every: int,
           event: Optional[BallEvent]) -> TrajectoryBatch:
    T = result["path"].shape[1]
    return TrajectoryBatch(
        replica_ids=np.asarray(replica_ids, dtype=int),
        sizes=np.asarray(sizes, dtype=int),
        dt=dt,
        times=np.arange(T) * thin_every * dt,
        barycenters=result["path"],
        terminal=result["terminal"],
        steps_taken=result["steps_taken"],
        states=result["states"],
        event_name=event.name if event is not None else None,
        event_times=result["event_times"] if event is not None else None,
        event_points=result["event_points"] if event is not None else None,
        event_states=result["event_states"] if event is not None else None,
        second_moment_batches=result["second"],
        centered_batches=result["centered"],
        increments=result["increments"],
    )


# ---------------------------------------------------------------------------
# Particle system and barycenter SDE
# ---------------------------------------------------------------------------

def particle_drift(spec, model: str) -> Callable[[np.ndarray], np.ndarray]:
    """Drift b with dX = -b dt + sqrt(2) dB for a stack of clouds (K, N, d)."""
    kappa = spec.kappa
    if model == "toy":
        def drift(X):
            return spec.v_grad(X.mean(axis=1))[:, None, :] + kappa * X
    else:
        def drift(X):
            return spec.v_grad(X) - kappa * X.mean(axis=1)[:, None, :]
    return drift


def simulate_particles(cfg: SimConfig, replicas: int = 1, event: Optional[BallEvent] = None,
                       record_path: bool = True) -> TrajectoryBatch:
    """
    Simulate the N-particle system for a batch of replicas.

    Replica r uses id cfg.replica_id + r and the stream keyed by
    (seed, N, id), so its path does not depend on the batch or on the
    worker count.

    Args:
        cfg: Simulation configuration
        replicas: Number of consecutive replica ids
        event: Optional barycenter event stopping each replica
        record_path: Store the thinned barycenter path

    Returns:
        TrajectoryBatch with ergodic batch means when batches > 0

    Raises:
        DivergenceError: If a state leaves the divergence threshold
    """
    op = "dynamics.simulate_particles"
    require_count("replicas", replicas, op)
    ids = cfg.replica_id + np.arange(replicas)
    X0 = np.stack([initial_cloud(cfg, int(r)) for r in ids])
    gens = [replica_stream(cfg.seed, cfg.N, int(r)) for r in ids]
    scale = np.full(replicas, math.sqrt(2 * cfg.dt))
    logger.debug(f"simulate_particles: {cfg.model} N={cfg.N} dt={cfg.dt} steps={cfg.steps} replicas={replicas}")
    result = _run_chunked(
        particle_drift(cfg.spec, cfg.model), X0, gens, scale, None,
        dt=cfg.dt, steps=cfg.steps, event=event, thin_every=cfg.thin_every, record_path=record_path,
        store_states=cfg.store_states, burn_steps=cfg.burn_steps, batches=cfg.batches,
        record_increments=cfg.record_increments, noise=cfg.noise, operation=op)
    return _batch(result, ids, np.full(replicas, cfg.N), cfg.dt, cfg.thin_every, event)


def simulate_barycenter_lanes(spec, sizes: Sequence[int], replica_ids: Sequence[int], starts: np.ndarray,
                              dt: float, horizon: float, seed: int = 0, event: Optional[BallEvent] = None,
                              noise: bool = True, record_path: bool = False,
                              thin_every: Optional[int] = None,
                              increments: Optional[np.ndarray] = None) -> TrajectoryBatch:
    """
    Reduced barycenter SDE on lanes of possibly different N.

    Lane k has noise scale sqrt(2 dt / N_k) and the stream keyed by
    (seed, N_k, replica_ids[k]). With increments given, lane k is driven
    by increments[k, step] instead of fresh normals.
    """
    op = "dynamics.simulate_barycenter"
    if spec.kind == "curie_weiss":
        raise UnsupportedModelError("the Curie-Weiss barycenter is not an autonomous diffusion", op)
    if dt is None or not dt > 0:
        raise StepSizeError(f"dt must be positive, got {dt!r}", op)
    sizes = np.asarray(sizes, dtype=int)
    replica_ids = np.asarray(replica_ids, dtype=int)
    starts = np.asarray(starts, dtype=float).reshape(len(sizes), spec.d)
    steps = int(round(horizon / dt))
    thin = thin_every or max(1, math.ceil(0.1 / dt - 1e-9))
    gens = [replica_stream(seed, n, r) for n, r in zip(sizes, replica_ids)]
    scale = np.sqrt(2 * dt / sizes)
    result = _run_chunked(
        spec.gradient, starts, gens, scale, increments,
        dt=dt, steps=steps, event=event, thin_every=thin, record_path=record_path,
        noise=noise, operation=op)
    return _batch(result, replica_ids, sizes, dt, thin, event)


def simulate_barycenter(cfg: SimConfig, replicas: int = 1, event: Optional[BallEvent] = None,
                        increments: Optional[np.ndarray] = None) -> TrajectoryBatch:
    """
    Simulate dXbar = -grad V_kappa(Xbar) dt + sqrt(2/N) dB (toy model only).

    The start of replica r is the mean of the same initial cloud
    simulate_particles would use. Passing the increments recorded by a
    full simulation replays its noise, and the two barycenter paths agree
    to rounding.

    Raises:
        UnsupportedModelError: For the Curie-Weiss model
    """
    op = "dynamics.simulate_barycenter"
    if cfg.model != "toy":
        raise UnsupportedModelError("the Curie-Weiss barycenter is not an autonomous diffusion", op)
    ids = cfg.replica_id + np.arange(replicas)
    if cfg.init.kind == "point":
        center = np.zeros(cfg.spec.d) if cfg.init.center is None else as_point(cfg.init.center, cfg.spec.d, op)
        starts = np.tile(center, (replicas, 1))
    else:
        starts = np.stack([initial_cloud(cfg, int(r)).mean(axis=0) for r in ids])
    if increments is not None:
        increments = np.asarray(increments, dtype=float)
        if increments.shape[:2] != (replicas, cfg.steps):
            raise InputError(f"increments have shape {increments.shape}, expected ({replicas}, {cfg.steps}, d)", op)
    return simulate_barycenter_lanes(
        cfg.spec, np.full(replicas, cfg.N), ids, starts, cfg.dt, cfg.horizon, cfg.seed, event,
        noise=cfg.noise, record_path=True, thin_every=cfg.thin_every, increments=increments)


# ---------------------------------------------------------------------------
# Mean-field Fokker-Planck equation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PdeRun:
    """Recorded densities and diagnostics of one finite-volume run."""

    model: str
    box: Tuple[float, float]
    cells: int
    dt: float
    times: np.ndarray
    densities: List[Density1D]
    means: np.ndarray
    variances: np.ndarray
    free_energies: np.ndarray
    max_mass_defect: float
    max_free_energy_increase: float
    min_density: float

    def rows(self) -> List[List[float]]:
        return [[t, m, v, f, rho.mass()] for t, m, v, f, rho in
                zip(self.times, self.means, self.variances, self.free_energies, self.densities)]


def bernoulli(z: np.ndarray) -> np.ndarray:
    """B(z) = z / (e^z - 1) with B(0) = 1."""
    with np.errstate(over="ignore", invalid="ignore"):
        em1 = np.expm1(z)
        out = np.where(z == 0, 1.0, z / np.where(z == 0, 1.0, em1))
    return np.where(np.isinf(em1) & (z > 0), 0.0, out)


def _confinement_half_width(spec, cutoff: float = 40.0) -> float:
    L = 1.0
    while L < 1e4:
        x = np.linspace(-L, L, 4001)
        vk = spec.value(x[:, None])
        if min(vk[0], vk[-1]) - vk.min() >= cutoff:
            return L
        L *= 1.25
    raise InputError("V_kappa does not grow enough to bound the solver box", "dynamics.solve_mckean_vlasov_1d")


def solve_mckean_vlasov_1d(spec, rho0: Union[GaussianSpec, Density1D], dt: Optional[float] = None,
                           horizon: float = 5.0, cells: int = 801, record_every: float = 0.1,
                           model: Optional[str] = None, box: Optional[Tuple[float, float]] = None) -> PdeRun:
    """
    Solve d_t rho = d_x(rho b) + d_xx rho on a box with no-flux boundaries.

    Toy model: b(x) = V'(m_rho) + kappa x. Curie-Weiss: b(x) = V'(x) - kappa m_rho.
    Fluxes use the exponential-fitting (Scharfetter-Gummel) form with the
    potential Phi of the frozen drift, so e^{-Phi} is the exact discrete
    equilibrium; time stepping is explicit Euler.

    Args:
        spec: One-dimensional potential descriptor
        rho0: Initial Gaussian or tabulated density
        dt: Time step; defaults to 0.9 of the stability bound
        horizon: Final time
        cells: Number of finite-volume cells
        record_every: Time between recorded densities
        model: 'toy' or 'curie_weiss'; inferred from the spec kind when omitted
        box: Solver interval; by default V_kappa rises by 40 above its minimum at the ends

    Returns:
        PdeRun with recorded densities, means, variances and free energies

    Raises:
        StepSizeError: If dt violates the positivity bound (the message suggests a dt)
        InputError: If rho0 has mass outside the box
    """
    op = "dynamics.solve_mckean_vlasov_1d"
    if spec.d != 1:
        raise UnsupportedError("the PDE solver is one-dimensional", op)
    model = model or ("curie_weiss" if spec.kind == "curie_weiss" else "toy")
    if model not in MODELS:
        raise UnsupportedModelError(f"unknown model {model!r}", op)
    cells = require_count("cells", cells, op, minimum=16)
    record_every = require_positive("record_every", record_every, op)
    kappa = spec.kappa

    if box is None:
        L = _confinement_half_width(spec, get_lab_config().quadrature_cutoff)
        if isinstance(rho0, GaussianSpec):
            spread = max(rho0.s2, 1.0 / kappa) if model == "toy" else rho0.s2
            L = max(L, abs(float(rho0.mean[0])) + math.sqrt(80 * spread))
        else:
            L = max(L, float(np.abs(rho0.cell_edges()).max()))
        box = (-L, L)
    lo, hi = float(box[0]), float(box[1])
    h = (hi - lo) / cells
    x = lo + h * (np.arange(cells) + 0.5)

    if isinstance(rho0, GaussianSpec):
        if rho0.d != 1:
            raise InputError("initial Gaussian must be one-dimensional", op)
        sd = math.sqrt(rho0.s2)
        cdf = norm.cdf((lo + h * np.arange(cells + 1) - rho0.mean[0]) / sd)
        rho = np.diff(cdf) / h
        outside = 1.0 - (cdf[-1] - cdf[0])
    else:
        rho = np.interp(x, rho0.nodes, rho0.values / rho0.mass(), left=0.0, right=0.0)
        outside = float(rho0.masses[(rho0.nodes < lo) | (rho0.nodes > hi)].sum() / rho0.mass())
    if outside > 1e-9:
        raise InputError(f"initial density has mass {outside:.3g} outside the box [{lo:g}, {hi:g}]", op)
    rho = rho / (h * rho.sum())

    v_x = spec.v_value(x[:, None])
    dv = np.diff(v_x)
    dsq = np.diff(0.5 * kappa * x ** 2)

    def potential_steps(m):
        if model == "toy":
            return float(spec.v_grad(np.array([m]))[0]) * h + dsq
        return dv - kappa * m * h

    def free_energy_of(r, m):
        entropy = h * np.sum(r * np.log(np.maximum(r, 1e-300)))
        if model == "toy":
            return float(spec.v_value(np.array([[m]]))[0]) + 0.5 * kappa * h * np.sum(r * x ** 2) + entropy
        return h * np.sum(r * v_x) - 0.5 * kappa * m * m + entropy

    def outflow(bp, bm):
        # coefficient of rho_i in its own outgoing flux
        return np.concatenate([bp, [0.0]]) + np.concatenate([[0.0], bm])

    m = h * np.sum(rho * x)
    z = potential_steps(m)
    dt_max = h * h / float(outflow(bernoulli(z), bernoulli(-z)).max())
    if dt is None:
        dt = 0.9 * dt_max
    elif dt > dt_max:
        raise StepSizeError(f"dt={dt:g} exceeds the stability bound {dt_max:.3g} for h={h:.3g}; "
                            f"try dt={0.9 * dt_max:.3g}", op)
    dt = float(dt)
    steps = int(round(horizon / dt))
    stride = max(1, int(round(record_every / dt)))
    logger.info(f"PDE {model}: box=[{lo:.3g}, {hi:.3g}] cells={cells} dt={dt:.3g} steps={steps}")

    times, densities, means, variances, energies = [], [], [], [], []

    def record(step, r, m):
        times.append(step * dt)
        densities.append(Density1D.uniform_cells(lo, hi, r.copy()))
        means.append(m)
        variances.append(h * np.sum(r * (x - m) ** 2))
        energies.append(free_energy_of(r, m))

    record(0, rho, m)
    F = free_energy_of(rho, m)
    max_increase = -np.inf
    max_defect = 0.0
    min_density = float(rho.min())
    mass = h * rho.sum()
    ratio = dt / (h * h)
    for step in range(1, steps + 1):
        z = potential_steps(m)
        bp, bm = bernoulli(z), bernoulli(-z)
        flux = bp * rho[:-1] - bm * rho[1:]
        worst = float(outflow(bp, bm).max())
        if ratio * worst > 1.0 + 1e-12:
            suggested = 0.9 * h * h / worst
            raise StepSizeError(f"stability bound violated at step {step}; try dt={suggested:.3g}", op)
        change = np.zeros(cells)
        change[:-1] -= flux
        change[1:] += flux
        rho = rho + ratio * change
        new_mass = h * rho.sum()
        max_defect = max(max_defect, abs(new_mass - mass))
        mass = new_mass
        min_density = min(min_density, float(rho.min()))
        m = h * np.sum(rho * x)
        F_new = free_energy_of(rho, m)
        max_increase = max(max_increase, F_new - F)
        F = F_new
        if step % stride == 0 or step == steps:
            record(step, rho, m)

    if max_increase > 1e-8:
        logger.warning(f"free energy increased by {max_increase:.3g} in one step")
    return PdeRun(model, (lo, hi), cells, dt, np.array(times), densities, np.array(means),
                  np.array(variances), np.array(energies), max_defect,
                  float(max_increase) if steps else 0.0, min_density)


def gaussian_family_flow(spec, m0, s0_2: float, times: Sequence[float]) -> Dict[str, np.ndarray]:
    """
    Gaussian solution of the toy-model PDE: the mean solves dm/dt = -grad V_kappa(m)
    and the variance is s0_2 e^{-2 kappa t} + (1 - e^{-2 kappa t}) / kappa.
    """
    op = "dynamics.gaussian_family_flow"
    if spec.kind == "curie_weiss":
        raise UnsupportedModelError("the Gaussian family is invariant for the toy model only", op)
    m0 = as_point(m0, spec.d, op)
    times = np.asarray(times, dtype=float)
    sol = solve_ivp(lambda t, m: -spec.gradient(m), (0.0, float(times.max())), m0, method="DOP853",
                    t_eval=times, rtol=1e-11, atol=1e-12)
    if not sol.success:
        raise NumericError(f"mean ODE failed: {sol.message}", op)
    decay = np.exp(-2 * spec.kappa * times)
    return {"times": times, "means": sol.y.T, "variances": s0_2 * decay + (1 - decay) / spec.kappa}


def ou_cloud_control(N_list: Sequence[int] = (64, 256, 1024), seeds: int = 20, horizon_factor: float = 3.0,
                     kappa: float = 1.0, dt: float = 1e-2, seed: int = 0) -> Dict[str, Any]:
    """
    Stationary Ornstein-Uhlenbeck clouds (V = 0): for each N, the median over
    seeds of max_{t <= horizon_factor ln N} W2(empirical first coordinates, N(0, 1/kappa)).
    """
    target = GaussianSpec(np.zeros(1), 1.0 / kappa)
    medians, per_seed = [], []
    for N in N_list:
        cfg = SimConfig(quadratic(kappa), int(N), dt, horizon_factor * math.log(N), seed=seed,
                        init=InitSpec("gaussian", [0.0], 1.0 / kappa), store_states=True, batches=0)
        batch = simulate_particles(cfg, replicas=seeds)
        worst = np.array([max(w2(batch.states[k, t, :, :1], target) for t in range(batch.states.shape[1]))
                          for k in range(seeds)])
        per_seed.append(worst)
        medians.append(float(np.median(worst)))
        logger.info(f"OU cloud N={N}: median max W2 {medians[-1]:.4g}")
    medians_arr = np.array(medians)
    return {
        "N_list": list(map(int, N_list)),
        "median_max_w2": medians_arr,
        "per_seed": np.array(per_seed),
        "decreasing": bool(np.all(np.diff(medians_arr) < 0)),
    }
