# __file__: verify.py
#
# __brief__:
#     Independent checks of a synthesized polynomial and its vector fields:
#         - exact gradient and Hessian minors at the prescribed points,
#         - central finite differences against the symbolic partials,
#         - a Newton sweep over a seed grid looking for other critical points,
#         - eigenvalue sign counts of Hessians and field Jacobians,
#         - batched RK4 integration of a flow with basin classification.
#     Mathematical failures end up in reports and trace classifications, never in exceptions.

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.constants import (
    BASIN_PASS_FRACTION,
    BASIN_SEEDS,
    BOX_INFLATION,
    BOX_MARGIN,
    DEFAULT_SEED,
    EIGEN_TOL,
    FD_STEP,
    FLOW_DT,
    FLOW_ESCAPE_FACTOR,
    FLOW_GRAD_TOL,
    FLOW_MAX_HALVINGS,
    FLOW_MIN_STEP_BUDGET,
    FLOW_MOVE_FRACTION,
    FLOW_POINT_TOL,
    FLOW_SAMPLE_EVERY,
    FLOW_STABILITY_BOUND,
    FLOW_STEP_BUDGET,
    FLOW_T_MAX,
    LYAPUNOV_TOL,
    NEWTON_COND_LIMIT,
    NEWTON_DEDUP_TOL,
    NEWTON_MAX_ITER,
    NEWTON_RESIDUAL_TOL,
    NEWTON_SEEDS_PER_AXIS,
    SOUNDNESS_TOL,
)
from core.exact_linalg import leading_minors
from core.poly_core import (
    MapEvaluator,
    MultiPoly,
    PolyMap,
    eval_float_batch,
    eval_map_rational,
    eval_rational,
    gradient,
    hessian,
    to_rational,
)
from utils.exceptions import (
    DimensionMismatchError,
    MalformedInputError,
    NonFiniteInputError,
    UnsupportedOperationError,
)
from utils.logger import setup_logger

# ==========
verify_logger = setup_logger(name="verify.py_logger", log_file="verify.log")
# ==========

verify_logger.info("verify_logger")

# FlowTrace.classified values
CONVERGED_TO: str = "converged_to"
MAX_TIME_REACHED: str = "max_time_reached"
DIVERGED: str = "diverged"

# Per-seed status inside the batched integrator
_ACTIVE, _CONVERGED, _MAX_TIME, _ESCAPED = 0, 1, 2, 3
_STATUS_NAMES = {_CONVERGED: CONVERGED_TO, _MAX_TIME: MAX_TIME_REACHED, _ESCAPED: DIVERGED}


# ==================================================================== configuration
@dataclass(frozen=True)
class VerifyConfig:
    """Every numeric knob of the verification layer; CLI flags mirror these names."""

    residual_tol: float = NEWTON_RESIDUAL_TOL
    dedup_tol: float = NEWTON_DEDUP_TOL
    max_iter: int = NEWTON_MAX_ITER
    seeds_per_axis: int = NEWTON_SEEDS_PER_AXIS
    soundness_tol: float = SOUNDNESS_TOL
    dt: float = FLOW_DT
    t_max: float = FLOW_T_MAX
    grad_tol: float = FLOW_GRAD_TOL
    point_tol: float = FLOW_POINT_TOL
    escape_factor: float = FLOW_ESCAPE_FACTOR
    max_halvings: int = FLOW_MAX_HALVINGS
    move_fraction: float = FLOW_MOVE_FRACTION
    sample_every: int = FLOW_SAMPLE_EVERY
    lyapunov_tol: float = LYAPUNOV_TOL
    fd_step: float = FD_STEP
    eigen_tol: float = EIGEN_TOL
    basin_seeds: int = BASIN_SEEDS
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise MalformedInputError("config values must be finite numbers", key=f.name, value=value)
            if f.name == "seed":
                if value < 0 or not float(value).is_integer():
                    raise MalformedInputError("seed must be a non-negative integer", value=value)
            elif value <= 0:
                raise MalformedInputError("tolerances and step sizes must be positive", key=f.name, value=value)
        if self.seeds_per_axis < 2:
            raise MalformedInputError("seeds_per_axis must be at least 2", value=self.seeds_per_axis)
        if self.escape_factor < 1:
            raise MalformedInputError("escape_factor must be at least 1", value=self.escape_factor)
        if self.move_fraction > 1:
            raise MalformedInputError("move_fraction must be at most 1", value=self.move_fraction)

    def with_overrides(self, **overrides) -> "VerifyConfig":
        """Copy with the given fields replaced; None values are ignored.

        Raises:
            MalformedInputError: unknown key, or a value that is not positive
        """
        known = {f.name for f in fields(self)}
        clean = {}
        for key, value in overrides.items():
            if key not in known:
                raise MalformedInputError("unknown verification setting", key=key)
            if value is not None:
                clean[key] = value
        return replace(self, **clean)

    def to_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ==================================================================== box
@dataclass(frozen=True)
class BoxSpec:
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    derivation: str = "explicit bounds"

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise MalformedInputError("box bounds must have the same positive length", lower=lower, upper=upper)
        if not all(math.isfinite(v) for v in lower + upper):
            raise MalformedInputError("box bounds must be finite", lower=lower, upper=upper)
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise MalformedInputError("box needs lower < upper on every axis", lower=lower, upper=upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_points(
        cls, points: Sequence[Sequence], inflation: float = BOX_INFLATION, margin: float = BOX_MARGIN
    ) -> "BoxSpec":
        """Bounding box of the points, half-widths scaled by `inflation`, plus `margin` per axis."""
        arr = np.array([[float(v) for v in p] for p in points], dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise MalformedInputError("a box needs at least one point")
        lo, hi = arr.min(axis=0), arr.max(axis=0)
        center, half = (lo + hi) / 2, (hi - lo) / 2
        half = inflation * half + margin
        return cls(
            tuple(center - half),
            tuple(center + half),
            f"bounding box of X, half-widths x{inflation:g}, plus margin {margin:g} per axis",
        )

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.lower) + np.array(self.upper)) / 2

    def inflated(self, factor: float) -> "BoxSpec":
        center = self.center
        half = (np.array(self.upper) - np.array(self.lower)) / 2 * factor
        return BoxSpec(tuple(center - half), tuple(center + half), f"{self.derivation}; inflated x{factor:g}")

    def contains(self, points) -> np.ndarray:
        """Row mask, bounds inclusive; NaN rows are outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all((pts >= np.array(self.lower)) & (pts <= np.array(self.upper)), axis=1)

    def grid(self, per_axis: int) -> np.ndarray:
        """Uniform tensor grid with `per_axis` nodes per axis, first axis slowest."""
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.dimension))


# ==================================================================== reports
@dataclass
class PointCert:
    point: Tuple[Fraction, ...]
    gradient: Tuple[Fraction, ...]
    minors: List[Fraction]
    stored_minors_match: Optional[bool] = None

    @property
    def gradient_is_zero(self) -> bool:
        return all(g == 0 for g in self.gradient)

    @property
    def passed(self) -> bool:
        return (
            self.gradient_is_zero
            and all(m > 0 for m in self.minors)
            and self.stored_minors_match is not False
        )


@dataclass
class SpuriousSearch:
    seeds_used: int
    converged_points: List[List[float]]
    all_within_tol_of_X: bool
    singular_seeds: int
    unconverged_seeds: int
    box: BoxSpec


@dataclass
class CertReport:
    """overall_pass = every point passes, the Newton sweep is sound, and every consistency check holds."""

    per_point: List[PointCert]
    spurious_search: SpuriousSearch
    consistency: Dict[str, bool] = field(default_factory=dict)
    config: Optional[VerifyConfig] = None

    @property
    def overall_pass(self) -> bool:
        return (
            bool(self.per_point)
            and all(p.passed for p in self.per_point)
            and self.spurious_search.all_within_tol_of_X
            and all(self.consistency.values())
        )

    def failures(self) -> List[str]:
        """Readable reasons, empty when the report passes."""
        reasons = []
        if not self.per_point:
            reasons.append("no points to certify")
        for i, p in enumerate(self.per_point):
            if not p.gradient_is_zero:
                reasons.append(f"point {i}: gradient is not exactly zero")
            if not all(m > 0 for m in p.minors):
                reasons.append(f"point {i}: a leading Hessian minor is not positive")
            if p.stored_minors_match is False:
                reasons.append(f"point {i}: stored minors differ from recomputed ones")
        if not self.spurious_search.all_within_tol_of_X:
            reasons.append("Newton search converged away from X")
        reasons.extend(f"consistency check failed: {name}" for name, ok in self.consistency.items() if not ok)
        return reasons


# ==================================================================== gradient oracle
def fd_gradient_check(p: MultiPoly, x: Sequence[float], h: float = FD_STEP) -> float:
    """Max relative deviation between symbolic partials and central differences.

    The deviation is taken relative to max(||symbolic gradient||_inf, 1).
    Non-finite intermediate values give inf (logged, not raised).

    Raises:
        MalformedInputError: h <= 0
        DimensionMismatchError: wrong point length
        NonFiniteInputError: x has a NaN or inf coordinate
    """
    if not h > 0:
        raise MalformedInputError("finite-difference step must be positive", h=h)
    point = np.asarray(x, dtype=np.float64).ravel()
    if point.size != p.dimension:
        raise DimensionMismatchError("point length does not match dimension", length=point.size, dimension=p.dimension)
    if not np.all(np.isfinite(point)):
        raise NonFiniteInputError("non-finite coordinate", point=point.tolist(), function="fd_gradient_check()")

    n = p.dimension
    symbolic = MapEvaluator(gradient(p))(point)[0]
    shifts = np.eye(n) * h
    plus_minus = np.concatenate([point + shifts, point - shifts])
    values = eval_float_batch(p, plus_minus, check_finite=False)
    central = (values[:n] - values[n:]) / (2 * h)

    if not (np.all(np.isfinite(symbolic)) and np.all(np.isfinite(central))):
        verify_logger.warning(f"fd_gradient_check: non-finite values at {point.tolist()}")
        return math.inf
    scale = max(float(np.max(np.abs(symbolic))), 1.0)
    return float(np.max(np.abs(symbolic - central)) / scale)


# ==================================================================== Newton sweep
@dataclass
class NewtonOutcome:
    points: List[np.ndarray]  # converged, deduplicated, in seed order
    seeds_used: int
    singular_seeds: int
    unconverged_seeds: int
    converged_mask: np.ndarray
    finals: np.ndarray
    iterations: np.ndarray  # per seed, -1 if it never converged


def _scaled_residual(values: np.ndarray, magnitudes: np.ndarray) -> np.ndarray:
    # |dP/dx_i| relative to the size of the terms it was summed from
    return np.max(np.abs(values) / np.maximum(magnitudes, 1.0), axis=1)


def _dedup(points: Sequence[np.ndarray], tol: float) -> List[np.ndarray]:
    kept: List[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > tol for q in kept):
            kept.append(p)
    return kept


def _jacobian_evaluator(m: PolyMap) -> MapEvaluator:
    flat = [entry for row in m.jacobian() for entry in row]
    return MapEvaluator(PolyMap(m.domain_dim, flat))


def newton_from_seeds(
    grad: PolyMap,
    seeds,
    config: Optional[VerifyConfig] = None,
    escape_box: Optional[BoxSpec] = None,
) -> NewtonOutcome:
    """Batched Newton iteration x <- x - H(x)^-1 grad(x) from every seed.

    A seed converges once the scaled residual drops below residual_tol. It is
    abandoned when its Hessian is singular (counted separately), when a value
    turns non-finite, or when it leaves escape_box.
    """
    config = config or VerifyConfig()
    n = grad.domain_dim
    if grad.codomain_dim != n:
        raise DimensionMismatchError("Newton needs a square system", domain=n, codomain=grad.codomain_dim)

    g_eval = MapEvaluator(grad)
    h_eval = _jacobian_evaluator(grad)
    x = np.array(seeds, dtype=np.float64).reshape(-1, n)
    count = x.shape[0]
    converged = np.zeros(count, dtype=bool)
    singular = np.zeros(count, dtype=bool)
    iterations = np.full(count, -1, dtype=np.int64)
    active = np.arange(count)

    for it in range(config.max_iter + 1):
        if not active.size:
            break
        xa = x[active]
        g = g_eval(xa)
        ok = np.all(np.isfinite(g), axis=1) & np.all(np.isfinite(xa), axis=1)
        if escape_box is not None:
            ok &= escape_box.contains(xa)
        residual = np.full(active.size, np.inf)
        residual[ok] = _scaled_residual(g[ok], g_eval.magnitude(xa[ok]))
        done = ok & (residual < config.residual_tol)
        converged[active[done]] = True
        iterations[active[done]] = it

        keep = ok & ~done
        if it == config.max_iter:
            break
        active, xa, g = active[keep], xa[keep], g[keep]
        if not active.size:
            break

        h = h_eval(xa).reshape(-1, n, n)
        finite_h = np.all(np.isfinite(h), axis=(1, 2))
        cond = np.full(active.size, np.inf)
        if finite_h.any():
            cond[finite_h] = np.linalg.cond(h[finite_h])
        regular = finite_h & (cond < NEWTON_COND_LIMIT)
        singular[active[~regular]] = True

        active, xa, g, h = active[regular], xa[regular], g[regular], h[regular]
        if active.size:
            x[active] = xa - np.linalg.solve(h, g[..., None])[..., 0]

    found = [x[i].copy() for i in np.flatnonzero(converged)]
    points = _dedup(found, config.dedup_tol)
    n_singular = int(np.count_nonzero(singular))
    return NewtonOutcome(
        points=points,
        seeds_used=count,
        singular_seeds=n_singular,
        unconverged_seeds=int(count - np.count_nonzero(converged) - n_singular),
        converged_mask=converged,
        finals=x,
        iterations=iterations,
    )


def newton_search(
    grad: PolyMap,
    box: BoxSpec,
    seeds_per_axis: Optional[int] = None,
    config: Optional[VerifyConfig] = None,
) -> NewtonOutcome:
    """Newton from a uniform seed grid over box; iterates may roam the escape box.

    Raises:
        MalformedInputError: seeds_per_axis < 2
        DimensionMismatchError: box and grad disagree on the dimension
    """
    config = config or VerifyConfig()
    seeds_per_axis = config.seeds_per_axis if seeds_per_axis is None else seeds_per_axis
    if seeds_per_axis < 2:
        raise MalformedInputError("seeds_per_axis must be at least 2", value=seeds_per_axis)
    if box.dimension != grad.domain_dim:
        raise DimensionMismatchError("box dimension differs from the gradient's", box=box.dimension, grad=grad.domain_dim)

    outcome = newton_from_seeds(grad, box.grid(seeds_per_axis), config, box.inflated(config.escape_factor))
    verify_logger.info(
        f"newton_search: {outcome.seeds_used} seeds, {len(outcome.points)} distinct critical points, "
        f"{outcome.singular_seeds} singular, {outcome.unconverged_seeds} unconverged"
    )
    return outcome


# ==================================================================== eigenvalues
def eigen_signs(matrix, tol: float = EIGEN_TOL) -> Tuple[int, int, int]:
    """(positive, negative, ambiguous) eigenvalue counts; real parts for non-symmetric input."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError("eigen_signs needs a square matrix", shape=m.shape)
    if np.array_equal(m, m.T):
        values = np.linalg.eigvalsh(m)
    else:
        values = np.linalg.eigvals(m).real
    positive = int(np.count_nonzero(values > tol))
    negative = int(np.count_nonzero(values < -tol))
    return positive, negative, m.shape[0] - positive - negative


def field_jacobian(m: PolyMap, point: Sequence[float]) -> np.ndarray:
    n = m.domain_dim
    return _jacobian_evaluator(m)(np.asarray(point, dtype=np.float64))[0].reshape(m.codomain_dim, n)


def jacobian_signs(m: PolyMap, point: Sequence[float], tol: float = EIGEN_TOL) -> Tuple[int, int, int]:
    """Sign pattern of the linearization of a vector field at a point."""
    return eigen_signs(field_jacobian(m, point), tol)


# ==================================================================== certification
def certify_polynomial(
    p: MultiPoly,
    points: Sequence[Sequence],
    box: Optional[BoxSpec] = None,
    config: Optional[VerifyConfig] = None,
    stored_minors: Optional[Sequence[Sequence]] = None,
    consistency: Optional[Dict[str, bool]] = None,
) -> CertReport:
    """Exact check at every point plus a Newton sweep of the box for other critical points.

    Args:
        p (MultiPoly): the polynomial whose critical set should be exactly `points`
        points: rational points (ints, Fractions or rational strings)
        box (BoxSpec, optional): search region, BoxSpec.from_points(points) by default
        config (VerifyConfig, optional): tolerances
        stored_minors (optional): minors claimed elsewhere (e.g. in a bundle); compared, not trusted
        consistency (dict, optional): extra named checks folded into overall_pass

    Returns:
        CertReport: never raises for a mathematical failure
    """
    config = config or VerifyConfig()
    grad = gradient(p)
    hess = hessian(p)

    per_point: List[PointCert] = []
    for i, raw in enumerate(points):
        point = tuple(to_rational(v) for v in raw)
        if len(point) != p.dimension:
            raise DimensionMismatchError("point length does not match dimension", index=i, dimension=p.dimension)
        grad_value = eval_map_rational(grad, point)
        matrix = [[eval_rational(entry, point) for entry in row] for row in hess]
        minors = leading_minors(matrix)
        match = None
        if stored_minors is not None:
            match = i < len(stored_minors) and [to_rational(m) for m in stored_minors[i]] == minors
        cert = PointCert(point=point, gradient=grad_value, minors=minors, stored_minors_match=match)
        if not cert.passed:
            verify_logger.warning(f"certify_polynomial: point {i} failed ({[str(v) for v in point]})")
        per_point.append(cert)

    if box is None:
        box = BoxSpec.from_points(points) if points else BoxSpec((-1.0,) * p.dimension, (1.0,) * p.dimension)
    outcome = newton_search(grad, box, config.seeds_per_axis, config)
    targets = np.array([[float(v) for v in c.point] for c in per_point]).reshape(-1, p.dimension)
    within = all(
        targets.size and float(np.min(np.linalg.norm(targets - q, axis=1))) <= config.soundness_tol
        for q in outcome.points
    )
    search = SpuriousSearch(
        seeds_used=outcome.seeds_used,
        converged_points=[q.tolist() for q in outcome.points],
        all_within_tol_of_X=bool(within),
        singular_seeds=outcome.singular_seeds,
        unconverged_seeds=outcome.unconverged_seeds,
        box=box,
    )
    report = CertReport(per_point=per_point, spurious_search=search, consistency=dict(consistency or {}), config=config)
    verify_logger.info(f"certify_polynomial: {len(per_point)} points, overall_pass={report.overall_pass}")
    return report
# ==================================================================== flows
@dataclass
class FlowTrace:
    start: Tuple[float, ...]
    steps: int
    end: Tuple[float, ...]
    classified: str  # CONVERGED_TO, MAX_TIME_REACHED or DIVERGED
    final_grad_norm: float
    target_index: Optional[int] = None
    dt: float = FLOW_DT
    halved: bool = False
    note: str = ""
    sample_steps: List[int] = field(default_factory=list)
    samples: List[Tuple[float, ...]] = field(default_factory=list)
    potential_values: List[float] = field(default_factory=list)
    elapsed: Optional[float] = None
    halvings: int = 0

    @property
    def converged(self) -> bool:
        return self.classified == CONVERGED_TO

    @property
    def time(self) -> float:
        return self.steps * self.dt if self.elapsed is None else self.elapsed


@dataclass
class _FlowBatch:
    ends: np.ndarray
    status: np.ndarray
    labels: np.ndarray
    steps: np.ndarray
    norms: np.ndarray
    elapsed: np.ndarray
    rises: np.ndarray  # steps where the potential went up by more than the allowance
    halvings: np.ndarray
    dt: np.ndarray
    sample_steps: List[int] = field(default_factory=list)
    samples: List[np.ndarray] = field(default_factory=list)


@dataclass
class _FlowKernel:
    flow: MapEvaluator
    jacobian: MapEvaluator
    potential: Optional[MapEvaluator] = None


def _nearest(points: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if targets.shape[0] == 0:
        return np.full(points.shape[0], -1), np.full(points.shape[0], np.inf)
    dist = np.linalg.norm(points[:, None, :] - targets[None, :, :], axis=2)
    return np.argmin(dist, axis=1), np.min(dist, axis=1)


def _step_sizes(jac_norm: np.ndarray, speed: np.ndarray, dt: float, max_move: float) -> np.ndarray:
    """Per seed step: dt, shortened where the Jacobian is stiff or the field is fast."""
    with np.errstate(divide="ignore"):
        stable = np.where(jac_norm > 0, FLOW_STABILITY_BOUND / jac_norm, np.inf)
        travel = np.where(speed > 0, max_move / speed, np.inf)
    return np.minimum(dt, np.minimum(stable, travel))


def _rk4_batch(
    kernel: _FlowKernel,
    starts: np.ndarray,
    dt: float,
    t_max: float,
    targets: np.ndarray,
    escape_box: BoxSpec,
    max_move: float,
    config: VerifyConfig,
    record_every: int = 0,
) -> _FlowBatch:
    # Classical RK4. A seed stops when it converges, escapes, runs out of time or out of step budget.
    x = starts.copy()
    count = x.shape[0]
    status = np.full(count, _ACTIVE, dtype=np.int8)
    labels = np.full(count, -1, dtype=np.int64)
    steps = np.zeros(count, dtype=np.int64)
    norms = np.full(count, np.nan)
    elapsed = np.zeros(count)
    rises = np.zeros(count, dtype=np.int64)
    last_p = np.full(count, np.nan)
    budget = max(FLOW_STEP_BUDGET * int(math.ceil(t_max / dt - 1e-9)), FLOW_MIN_STEP_BUDGET)
    finish = t_max - 1e-9 * dt
    sample_steps: List[int] = []
    samples: List[np.ndarray] = []

    active = np.arange(count)
    for iteration in range(budget + 1):
        if not active.size:
            break
        y = x[active]
        k1 = kernel.flow(y)
        speed = np.linalg.norm(k1, axis=1)
        norms[active] = speed
        if record_every and iteration % record_every == 0:
            sample_steps.append(iteration)
            samples.append(x[0].copy())

        finite = np.all(np.isfinite(y), axis=1) & np.isfinite(speed)
        if kernel.potential is not None:
            p_now = np.full(active.size, np.nan)
            p_now[finite] = kernel.potential(y[finite])[:, 0]
            prev = last_p[active]
            with np.errstate(invalid="ignore"):
                rose = np.isfinite(prev) & (p_now - prev > config.lyapunov_tol * np.maximum(1.0, np.abs(prev)))
            rises[active[rose]] += 1
            last_p[active] = p_now

        bad = ~finite | ~escape_box.contains(y)
        status[active[bad]] = _ESCAPED
        label, dist = _nearest(y, targets)
        conv = ~bad & (speed < config.grad_tol) & (dist < config.point_tol)
        status[active[conv]] = _CONVERGED
        labels[active[conv]] = label[conv]
        late = ~bad & ~conv & (elapsed[active] >= finish)
        status[active[late]] = _MAX_TIME

        keep = ~bad & ~conv & ~late
        if iteration == budget:
            status[active[keep]] = _MAX_TIME
            break
        active, y, k1, speed = active[keep], y[keep], k1[keep], speed[keep]
        if not active.size:
            break

        jac_norm = np.linalg.norm(kernel.jacobian(y), axis=1)
        stiff = ~np.isfinite(jac_norm)
        if stiff.any():
            status[active[stiff]] = _ESCAPED
            active, y, k1, speed, jac_norm = active[~stiff], y[~stiff], k1[~stiff], speed[~stiff], jac_norm[~stiff]
            if not active.size:
                break
        h = np.minimum(_step_sizes(jac_norm, speed, dt, max_move), t_max - elapsed[active])[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            k2 = kernel.flow(y + 0.5 * h * k1)
            k3 = kernel.flow(y + 0.5 * h * k2)
            k4 = kernel.flow(y + h * k3)
            x[active] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elapsed[active] += h[:, 0]
        steps[active] += 1

    if record_every and (not sample_steps or sample_steps[-1] != steps[0]):
        sample_steps.append(int(steps[0]))
        samples.append(x[0].copy())
    return _FlowBatch(
        ends=x,
        status=status,
        labels=labels,
        steps=steps,
        norms=norms,
        elapsed=elapsed,
        rises=rises,
        halvings=np.zeros(count, dtype=np.int64),
        dt=np.full(count, dt),
        sample_steps=sample_steps,
        samples=samples,
    )


def _integrate_batch(
    field_map: PolyMap,
    starts,
    targets,
    box: BoxSpec,
    config: VerifyConfig,
    dt: Optional[float] = None,
    t_max: Optional[float] = None,
    record_every: int = 0,
    potential: Optional[MultiPoly] = None,
) -> _FlowBatch:
    """Run every start; seeds that leave the escape box are rerun with dt halved, up to max_halvings times."""
    dt = config.dt if dt is None else dt
    t_max = config.t_max if t_max is None else t_max
    if not (dt > 0 and t_max > 0):
        raise MalformedInputError("dt and t_max must be positive", dt=dt, t_max=t_max)
    n = field_map.domain_dim
    starts = np.array(starts, dtype=np.float64).reshape(-1, n)
    targets = np.array(targets, dtype=np.float64).reshape(-1, n)
    escape_box = box.inflated(config.escape_factor)
    max_move = config.move_fraction * float(np.min(np.array(box.upper) - np.array(box.lower)))
    kernel = _FlowKernel(
        flow=MapEvaluator(field_map),
        jacobian=_jacobian_evaluator(field_map),
        potential=MapEvaluator(PolyMap(n, [potential])) if potential is not None else None,
    )

    batch = _rk4_batch(kernel, starts, dt, t_max, targets, escape_box, max_move, config, record_every)
    for halving in range(1, int(config.max_halvings) + 1):
        escaped = np.flatnonzero(batch.status == _ESCAPED)
        if not escaped.size:
            break
        step = dt / 2 ** halving
        verify_logger.debug(f"_integrate_batch: {escaped.size} seeds left the escape box, retrying with dt={step:g}")
        retry = _rk4_batch(kernel, starts[escaped], step, t_max, targets, escape_box, max_move, config, record_every)
        for name in ("ends", "status", "labels", "steps", "norms", "elapsed", "rises", "dt"):
            getattr(batch, name)[escaped] = getattr(retry, name)
        batch.halvings[escaped] = halving
        if record_every:
            batch.sample_steps, batch.samples = retry.sample_steps, retry.samples
    return batch


def integrate_flow(
    field_map: PolyMap,
    start: Sequence[float],
    dt: Optional[float] = None,
    t_max: Optional[float] = None,
    targets: Optional[Sequence[Sequence[float]]] = None,
    box: Optional[BoxSpec] = None,
    saddles: Optional[Sequence[Sequence[float]]] = None,
    potential: Optional[MultiPoly] = None,
    config: Optional[VerifyConfig] = None,
) -> FlowTrace:
    """Integrate x' = field(x) from start with classical RK4.

    Steps are dt, shortened where dt * |Jacobian| would leave the RK4 stability
    interval or where one step would travel more than move_fraction of the box.

    Args:
        field_map (PolyMap): the vector field
        start: initial state
        dt, t_max (float, optional): step and horizon, config values by default
        targets (optional): equilibria that count as convergence, indexed in the trace
        box (BoxSpec, optional): standard box; the escape box is box inflated by escape_factor
        saddles (optional): equilibria named in the note when the trace ends on one
        potential (MultiPoly, optional): evaluated at the recorded samples (Lyapunov check)
        config (VerifyConfig, optional): tolerances

    Raises:
        MalformedInputError: dt or t_max not positive
        DimensionMismatchError: start has the wrong length
        NonFiniteInputError: start has a NaN or inf coordinate

    Returns:
        FlowTrace: classification follows the trace invariants; diverged is reported, not raised
    """
    config = config or VerifyConfig()
    n = field_map.domain_dim
    start_arr = np.asarray(start, dtype=np.float64).ravel()
    if start_arr.size != n:
        raise DimensionMismatchError("start has the wrong length", length=start_arr.size, dimension=n)
    if not np.all(np.isfinite(start_arr)):
        raise NonFiniteInputError("non-finite start", start=start_arr.tolist(), function="integrate_flow()")
    target_arr = np.array(targets if targets is not None else [], dtype=np.float64).reshape(-1, n)
    if box is None:
        box = BoxSpec.from_points(np.vstack([target_arr, start_arr[None, :]]))

    batch = _integrate_batch(field_map, start_arr, target_arr, box, config, dt, t_max, config.sample_every)
    status = int(batch.status[0])
    end = batch.ends[0]
    label = int(batch.labels[0]) if status == _CONVERGED else None

    note = ""
    if status == _ESCAPED:
        note = "non-finite state" if not np.all(np.isfinite(end)) else "left the escape box after halving dt"
    elif status == _MAX_TIME and saddles is not None and len(saddles):
        saddle_arr = np.array(saddles, dtype=np.float64).reshape(-1, n)
        index, dist = _nearest(end[None, :], saddle_arr)
        if dist[0] < config.point_tol and batch.norms[0] < config.grad_tol:
            note = f"settled at saddle {int(index[0])}"

    values: List[float] = []
    if potential is not None and batch.samples:
        values = eval_float_batch(potential, np.array(batch.samples), check_finite=False).tolist()

    trace = FlowTrace(
        start=tuple(start_arr.tolist()),
        steps=int(batch.steps[0]),
        end=tuple(end.tolist()),
        classified=_STATUS_NAMES[status],
        final_grad_norm=float(batch.norms[0]),
        target_index=label,
        dt=float(batch.dt[0]),
        halved=bool(batch.halvings[0] > 0),
        note=note,
        sample_steps=list(batch.sample_steps),
        samples=[tuple(s.tolist()) for s in batch.samples],
        potential_values=values,
        elapsed=float(batch.elapsed[0]),
        halvings=int(batch.halvings[0]),
    )
    verify_logger.info(
        f"integrate_flow: {trace.classified} index={trace.target_index} after {trace.steps} steps "
        f"(t={trace.time:g}, dt={trace.dt:g}){' ' + note if note else ''}"
    )
    return trace


def lyapunov_violations(trace: FlowTrace, tol: Optional[float] = None) -> List[int]:
    """Sample indices where the potential rose by more than tol per step.

    The allowance per sample gap is tol * steps * max(1, |previous value|).
    """
    tol = LYAPUNOV_TOL if tol is None else tol
    bad = []
    values, steps = trace.potential_values, trace.sample_steps
    for i in range(1, len(values)):
        gap = max(steps[i] - steps[i - 1], 1)
        allowance = tol * gap * max(1.0, abs(values[i - 1]))
        if values[i] - values[i - 1] > allowance:
            bad.append(i)
    return bad


# ==================================================================== basins
@dataclass
class SeedClassification:
    seeds: np.ndarray
    labels: np.ndarray  # index into targets, -1 unresolved
    classified: List[str]
    steps: np.ndarray
    ends: Optional[np.ndarray] = None
    lyapunov_rises: Optional[np.ndarray] = None  # per seed, only when a potential was given

    def counts(self) -> Dict[str, int]:
        out = {CONVERGED_TO: 0, MAX_TIME_REACHED: 0, DIVERGED: 0}
        for c in self.classified:
            out[c] += 1
        return out


@dataclass
class BasinSample:
    fraction: float
    seeds_used: int
    seed: int
    counts: Dict[str, int]
    per_target: List[int]
    lyapunov_rises: int = 0
    detail: Optional[SeedClassification] = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return self.fraction >= BASIN_PASS_FRACTION


def classify_seeds(
    field_map: PolyMap,
    seeds,
    targets: Sequence[Sequence[float]],
    box: BoxSpec,
    config: Optional[VerifyConfig] = None,
    dt: Optional[float] = None,
    t_max: Optional[float] = None,
    potential: Optional[MultiPoly] = None,
) -> SeedClassification:
    """Integrate every seed as one batch and label it by the target it converged to.

    With a potential, every step of every seed is checked for a rise beyond lyapunov_tol.
    """
    config = config or VerifyConfig()
    seeds = np.array(seeds, dtype=np.float64).reshape(-1, field_map.domain_dim)
    batch = _integrate_batch(field_map, seeds, targets, box, config, dt, t_max, potential=potential)
    labels = np.where(batch.status == _CONVERGED, batch.labels, -1)
    return SeedClassification(
        seeds=seeds,
        labels=labels,
        classified=[_STATUS_NAMES[int(s)] for s in batch.status],
        steps=batch.steps,
        ends=batch.ends,
        lyapunov_rises=batch.rises if potential is not None else None,
    )


def _targets_of(xs) -> np.ndarray:
    if hasattr(xs, "as_floats"):
        return np.array(xs.as_floats(), dtype=np.float64)
    return np.array([[float(v) for v in p] for p in xs], dtype=np.float64)


def basin_sample(
    field_map: PolyMap,
    xs,
    box: BoxSpec,
    num_seeds: Optional[int] = None,
    seed: Optional[int] = None,
    config: Optional[VerifyConfig] = None,
    dt: Optional[float] = None,
    t_max: Optional[float] = None,
    potential: Optional[MultiPoly] = None,
) -> BasinSample:
    """Fraction of uniformly drawn seeds in box whose flow converges to a point of xs.

    Seeds come from numpy.random.default_rng(seed), so equal arguments give equal results.
    """
    config = config or VerifyConfig()
    num_seeds = config.basin_seeds if num_seeds is None else num_seeds
    seed = config.seed if seed is None else seed
    if num_seeds < 1:
        raise MalformedInputError("basin_sample needs at least one seed", num_seeds=num_seeds)

    targets = _targets_of(xs)
    seeds = box.sample(num_seeds, np.random.default_rng(seed))
    result = classify_seeds(field_map, seeds, targets, box, config, dt, t_max, potential)
    counts = result.counts()
    per_target = [int(np.count_nonzero(result.labels == i)) for i in range(targets.shape[0])]
    fraction = counts[CONVERGED_TO] / num_seeds
    rises = int(result.lyapunov_rises.sum()) if result.lyapunov_rises is not None else 0
    verify_logger.info(f"basin_sample: {num_seeds} seeds (seed={seed}), fraction={fraction:.4f}, {counts}")
    if rises:
        verify_logger.warning(f"basin_sample: potential rose on {rises} steps")
    return BasinSample(
        fraction=fraction,
        seeds_used=num_seeds,
        seed=seed,
        counts=counts,
        per_target=per_target,
        lyapunov_rises=rises,
        detail=result,
    )


def basin_raster(
    field_map: PolyMap,
    xs,
    box: BoxSpec,
    resolution: int,
    config: Optional[VerifyConfig] = None,
    dt: Optional[float] = None,
    t_max: Optional[float] = None,
) -> SeedClassification:
    """Classify a resolution x resolution grid over a planar box (x slowest)."""
    if field_map.domain_dim != 2:
        raise UnsupportedOperationError("rasters are only defined in the plane", dimension=field_map.domain_dim)
    if resolution < 2:
        raise MalformedInputError("resolution must be at least 2", resolution=resolution)
    return classify_seeds(field_map, box.grid(resolution), _targets_of(xs), box, config, dt, t_max)
