"""
Input validation utilities and experiment-document schemas for mflab.
"""
from typing import Any, Dict, Optional, Sequence

import numpy as np
from marshmallow import (
    Schema, fields, validate, validates_schema, post_load, RAISE,
    ValidationError as SchemaError,
)

from .mflab_logging import get_logger, MFLabError

logger = get_logger("validation")

SCHEMA_VERSION = 1

POTENTIAL_KINDS = ("quadratic", "quartic1d", "pca", "curie_weiss", "capped_saddle1d")

COMMANDS = (
    "potential-report", "critical-points", "gibbs", "simulate", "pde",
    "transition", "saddle-exit", "inequalities", "curie-weiss",
)


class ValidationError(MFLabError):
    """Raised when a configuration or an argument is invalid."""

    def __init__(self, message: str, operation: str = "", error_code: str = "CONFIG_ERROR"):
        super().__init__(message, 2, error_code, operation)


class InputError(ValidationError):
    """Raised when an argument has the wrong shape or type."""

    def __init__(self, message: str, operation: str = ""):
        super().__init__(message, operation, "INPUT_ERROR")


class ParameterError(ValidationError):
    """Raised when a parameter violates a stated hypothesis."""

    def __init__(self, message: str, operation: str = ""):
        super().__init__(message, operation, "PARAMETER_ERROR")


def as_point(m: Any, d: int, operation: str) -> np.ndarray:
    """
    Validate a point of R^d.

    Args:
        m: Point-like input (scalar for d=1, sequence otherwise)
        d: Expected dimension
        operation: Module and operation name used in error messages

    Returns:
        Float array of shape (d,)

    Raises:
        InputError: If the point has the wrong dimension or is not finite
    """
    try:
        arr = np.atleast_1d(np.asarray(m, dtype=float))
    except (TypeError, ValueError):
        raise InputError(f"point {m!r} is not numeric", operation)
    if arr.ndim != 1 or arr.shape[0] != d:
        raise InputError(f"expected a point of dimension {d}, got shape {arr.shape}", operation)
    if not np.all(np.isfinite(arr)):
        raise InputError("point has non-finite coordinates", operation)
    return arr


def as_batch(m: Any, d: int, operation: str) -> np.ndarray:
    """
    Validate a batch of points of shape (..., d).

    Raises:
        InputError: If the trailing axis is not d
    """
    arr = np.asarray(m, dtype=float)
    if d == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != d:
        raise InputError(f"expected trailing dimension {d}, got shape {arr.shape}", operation)
    return arr


def require_positive(name: str, value: float, operation: str) -> float:
    """Check that a scalar parameter is finite and strictly positive."""
    if value is None or not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be a positive number, got {value!r}", operation)
    return float(value)


def require_count(name: str, value: int, operation: str, minimum: int = 1) -> int:
    """Check that an integer parameter is at least minimum."""
    if value is None or int(value) != value or value < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {value!r}", operation)
    return int(value)


# ---------------------------------------------------------------------------
# Experiment document schemas
# ---------------------------------------------------------------------------

class StrictSchema(Schema):
    """Schema rejecting unknown keys."""

    class Meta:
        unknown = RAISE
        ordered = True


Point = fields.List(fields.Float(allow_nan=False))


class PotentialSchema(StrictSchema):
    kind = fields.String(required=True, validate=validate.OneOf(POTENTIAL_KINDS))
    kappa = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))
    d = fields.Integer(load_default=1, validate=validate.Range(min=1))
    matrix = fields.List(fields.List(fields.Float()), load_default=None, allow_none=True)
    sigma2 = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))
    kappa0 = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))
    lam = fields.Float(load_default=None, allow_none=True)
    a = fields.Float(load_default=None, allow_none=True)
    c = fields.Float(load_default=None, allow_none=True)

    @validates_schema
    def check_kind_parameters(self, data, **kwargs):
        kind = data["kind"]
        if kind == "pca" and not data.get("matrix"):
            raise SchemaError("pca potentials need 'matrix'", "matrix")
        if kind == "curie_weiss":
            if data.get("kappa0") is None:
                raise SchemaError("curie_weiss potentials need 'kappa0'", "kappa0")
            if data.get("kappa") is not None:
                raise SchemaError("curie_weiss derives kappa from kappa0/sigma2; do not set it", "kappa")
        if kind == "capped_saddle1d" and data.get("lam") is None:
            raise SchemaError("capped_saddle1d potentials need 'lam'", "lam")

    @post_load
    def fill_defaults(self, data, **kwargs):
        kind = data["kind"]
        if kind == "curie_weiss" and data.get("sigma2") is None:
            data["sigma2"] = 1.0
        if kind != "curie_weiss" and data.get("kappa") is None:
            data["kappa"] = 1.0
        if kind == "capped_saddle1d":
            data["a"] = 1.0 if data.get("a") is None else data["a"]
            data["c"] = 1.0 if data.get("c") is None else data["c"]
        return data


class LocalizeSchema(StrictSchema):
    center = Point
    radius = fields.Float(required=True, validate=validate.Range(min=0, min_inclusive=False))
    stiffness = fields.Float(load_default=50.0, validate=validate.Range(min=0))
    stiffness_cap = fields.Float(load_default=1e6, validate=validate.Range(min=0, min_inclusive=False))
    coincidence_N = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=1))
    coincidence_horizon = fields.Float(load_default=10.0, validate=validate.Range(min=0))
    coincidence_replicas = fields.Integer(load_default=100, validate=validate.Range(min=1))
    coincidence_dt = fields.Float(load_default=1e-3, validate=validate.Range(min=0, min_inclusive=False))
    coincidence_min = fields.Float(load_default=0.99, validate=validate.Range(min=0, max=1))


class PotentialReportSchema(StrictSchema):
    probes = fields.Integer(load_default=100, validate=validate.Range(min=1))
    points = fields.List(Point, load_default=list)
    localize = fields.Nested(LocalizeSchema, load_default=None, allow_none=True)


class CriticalPointsSchema(StrictSchema):
    box = fields.List(fields.List(fields.Float(), validate=validate.Length(equal=2)),
                      load_default=None, allow_none=True)
    grid_per_axis = fields.Integer(load_default=9, validate=validate.Range(min=2))
    fixed_point_grid = fields.Integer(load_default=801, validate=validate.Range(min=3))


class GibbsSchema(StrictSchema):
    at_critical = fields.Boolean(load_default=False)
    N_list = fields.List(fields.Integer(validate=validate.Range(min=1)),
                         load_default=lambda: [100, 316, 1000, 3162, 10000, 31623, 100000])
    entropy_N_list = fields.List(fields.Integer(validate=validate.Range(min=1)),
                                 load_default=lambda: [2 ** k for k in range(4, 21)])
    moment_orders = fields.List(fields.Integer(validate=validate.Range(min=1)), load_default=lambda: [2, 4])
    xi_max = fields.Float(load_default=3.0, validate=validate.Range(min=0, min_inclusive=False))
    xi_points = fields.Integer(load_default=121, validate=validate.Range(min=5))


class InitSchema(StrictSchema):
    kind = fields.String(load_default="gaussian", validate=validate.OneOf(("point", "gaussian", "file")))
    center = fields.List(fields.Float(), load_default=None, allow_none=True)
    variance = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0))
    path = fields.String(load_default=None, allow_none=True)


class SimulateSchema(StrictSchema):
    mode = fields.String(load_default="particles", validate=validate.OneOf(("particles", "barycenter", "ou-control")))
    model = fields.String(load_default=None, allow_none=True, validate=validate.OneOf(("toy", "curie_weiss")))
    N = fields.Integer(load_default=64, validate=validate.Range(min=1))
    dt = fields.Float(load_default=1e-3, validate=validate.Range(min=0, min_inclusive=False))
    horizon = fields.Float(load_default=10.0, validate=validate.Range(min=0))
    replicas = fields.Integer(load_default=1, validate=validate.Range(min=1))
    init = fields.Nested(InitSchema, load_default=lambda: InitSchema().load({}))
    noise = fields.Boolean(load_default=True)
    thin = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=1))
    burn_in = fields.Float(load_default=0.0, validate=validate.Range(min=0))
    batches = fields.Integer(load_default=50, validate=validate.Range(min=2))
    store = fields.String(load_default="moments", validate=validate.OneOf(("moments", "states")))
    ou_N_list = fields.List(fields.Integer(validate=validate.Range(min=2)), load_default=lambda: [64, 256, 1024])
    ou_seeds = fields.Integer(load_default=20, validate=validate.Range(min=1))
    ou_horizon_factor = fields.Float(load_default=3.0, validate=validate.Range(min=0, min_inclusive=False))


class PdeSchema(StrictSchema):
    dt = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))
    horizon = fields.Float(load_default=5.0, validate=validate.Range(min=0))
    cells = fields.Integer(load_default=801, validate=validate.Range(min=16))
    m0 = fields.Float(load_default=0.5)
    s0_2 = fields.Float(load_default=0.25, validate=validate.Range(min=0, min_inclusive=False))
    record_every = fields.Float(load_default=0.1, validate=validate.Range(min=0, min_inclusive=False))
    variance_tol = fields.Float(load_default=1e-3)
    w2_tol = fields.Float(load_default=1e-3)


class TransitionSchema(StrictSchema):
    x0 = fields.List(fields.Float(), load_default=lambda: [-1.0])
    x1 = fields.List(fields.Float(), load_default=lambda: [1.0])
    z = fields.List(fields.Float(), load_default=lambda: [0.0])
    delta = fields.Float(load_default=0.3, validate=validate.Range(min=0, min_inclusive=False))
    N_list = fields.List(fields.Integer(validate=validate.Range(min=1)), load_default=lambda: [12, 16, 20, 24, 28])
    replicas = fields.Integer(load_default=300, validate=validate.Range(min=1))
    dt = fields.Float(load_default=1e-3, validate=validate.Range(min=0, min_inclusive=False))
    horizon = fields.Float(load_default=None, allow_none=True)
    mode = fields.String(load_default="reduced", validate=validate.OneOf(("reduced", "particles")))
    bias_probe = fields.Float(load_default=0.1, validate=validate.Range(min=0, max=1))
    ks_N = fields.Integer(load_default=24, allow_none=True)
    ks_samples = fields.Integer(load_default=1000, validate=validate.Range(min=1))
    slope_rtol = fields.Float(load_default=0.1)
    prefactor_band = fields.List(fields.Float(), load_default=lambda: [0.5, 2.0], validate=validate.Length(equal=2))
    ks_threshold = fields.Float(load_default=0.08)


class SaddleExitSchema(StrictSchema):
    z = fields.List(fields.Float(), load_default=lambda: [0.0])
    delta = fields.Float(load_default=0.5, validate=validate.Range(min=0, min_inclusive=False))
    N_list = fields.List(fields.Integer(validate=validate.Range(min=1)), load_default=lambda: [4096])
    replicas = fields.Integer(load_default=2000, validate=validate.Range(min=1))
    dt = fields.Float(load_default=1e-3, validate=validate.Range(min=0, min_inclusive=False))
    mode = fields.String(load_default="reduced", validate=validate.OneOf(("reduced", "particles")))
    reference_samples = fields.Integer(load_default=1_000_000, validate=validate.Range(min=100))
    ks_threshold = fields.Float(load_default=0.1)
    w2_threshold = fields.Float(load_default=0.15)
    w2_fraction = fields.Float(load_default=0.9)


class LsiSchema(StrictSchema):
    c1 = fields.Float(required=True)
    c2 = fields.Float(required=True)
    beta = fields.Float(required=True)
    d = fields.Integer(load_default=1)
    kappa = fields.Float(load_default=1.0)
    N = fields.Float(load_default=100.0)
    R = fields.Float(load_default=2.0)


class PoincareSchema(StrictSchema):
    u = fields.String(load_default="quartic", validate=validate.OneOf(("quartic", "quadratic")))
    N_list = fields.List(fields.Integer(validate=validate.Range(min=1)),
                         load_default=lambda: [10, 31, 100, 316, 1000, 3162, 10000])
    exponent_tol = fields.Float(load_default=0.02)


class InequalitiesSchema(StrictSchema):
    box = fields.List(fields.List(fields.Float(), validate=validate.Length(equal=2)),
                      load_default=None, allow_none=True)
    grid_per_axis = fields.Integer(load_default=9, validate=validate.Range(min=3))
    zoom_levels = fields.Integer(load_default=16, validate=validate.Range(min=0))
    zoom_per_axis = fields.Integer(load_default=9, validate=validate.Range(min=3))
    r_min = fields.Float(load_default=1e-10, validate=validate.Range(min=0, min_inclusive=False))
    r_max = fields.Float(load_default=1.0, validate=validate.Range(min=0, min_inclusive=False))
    r_points = fields.Integer(load_default=101, validate=validate.Range(min=8))
    theta_exponent = fields.Float(load_default=None, allow_none=True)
    theta_tol = fields.Float(load_default=0.05)
    phi_exponent = fields.Float(load_default=None, allow_none=True)
    phi_tol = fields.Float(load_default=0.1)
    lsi = fields.Nested(LsiSchema, load_default=None, allow_none=True)
    poincare = fields.Nested(PoincareSchema, load_default=None, allow_none=True)


class CurieWeissSchema(StrictSchema):
    N_list = fields.List(fields.Integer(validate=validate.Range(min=1)),
                         load_default=lambda: [100, 316, 1000, 3162, 10000, 31623, 100000])
    entropy_N_list = fields.List(fields.Integer(validate=validate.Range(min=1)),
                                 load_default=lambda: [2 ** k for k in range(4, 21)])
    sigma2_band = fields.List(fields.Float(), load_default=lambda: [0.45, 0.47], validate=validate.Length(equal=2))
    lsi_exponent_tol = fields.Float(load_default=0.03)
    entropy_slope_tol = fields.Float(load_default=0.02)
    theta_exponent_tol = fields.Float(load_default=0.05)


COMMAND_SCHEMAS: Dict[str, type] = {
    "potential-report": PotentialReportSchema,
    "critical-points": CriticalPointsSchema,
    "gibbs": GibbsSchema,
    "simulate": SimulateSchema,
    "pde": PdeSchema,
    "transition": TransitionSchema,
    "saddle-exit": SaddleExitSchema,
    "inequalities": InequalitiesSchema,
    "curie-weiss": CurieWeissSchema,
}


class ExperimentConfigSchema(StrictSchema):
    schema = fields.Integer(required=True, validate=validate.Equal(SCHEMA_VERSION))
    command = fields.String(required=True, validate=validate.OneOf(COMMANDS))
    seed = fields.Integer(load_default=0, validate=validate.Range(min=0, max=2 ** 64 - 1))
    output = fields.String(load_default=None, allow_none=True)
    workers = fields.Integer(load_default=1, validate=validate.Range(min=1))
    potential = fields.Nested(PotentialSchema, required=True)
    params = fields.Dict(load_default=dict)

    @post_load
    def load_command_block(self, data, **kwargs):
        block_schema = COMMAND_SCHEMAS[data["command"]]()
        try:
            data["params"] = block_schema.load(data.get("params") or {})
        except SchemaError as e:
            raise SchemaError({"params": e.messages})
        return data


def load_experiment(document: Dict[str, Any]) -> Dict[str, Any]:
    """
    Validate an experiment document and materialize its defaults.

    Args:
        document: Parsed JSON document

    Returns:
        Validated document with every default filled in

    Raises:
        ValidationError: If the document does not match the schema
    """
    if not isinstance(document, dict):
        raise ValidationError("experiment document must be a JSON object", "cli.run")
    try:
        return ExperimentConfigSchema().load(document)
    except SchemaError as e:
        logger.warning(f"Experiment document rejected: {e.messages}")
        raise ValidationError(f"invalid experiment document: {e.messages}", "cli.run")


def dump_experiment(config: Dict[str, Any]) -> Dict[str, Any]:
    """Serialize a validated experiment document back into plain JSON types."""
    echo = ExperimentConfigSchema().dump(config)
    echo["params"] = COMMAND_SCHEMAS[config["command"]]().dump(config["params"])
    return echo


def optional_box(box: Optional[Sequence[Sequence[float]]], d: int, default: float,
                 operation: str) -> np.ndarray:
    """Return a (d, 2) box array, defaulting to [-default, default]^d."""
    if box is None:
        return np.tile([-default, default], (d, 1)).astype(float)
    arr = np.asarray(box, dtype=float)
    if arr.shape != (d, 2) or np.any(arr[:, 0] >= arr[:, 1]):
        raise InputError(f"box must be {d} pairs [lo, hi] with lo < hi", operation)
    return arr
