# __file__: numeric_tests.py
# __brief__: Floating-point verification layer: finite differences, Newton sweeps,
#            eigenvalue signs, RK4 flows and basin sampling

# TO RUN: pytest -vs numeric_tests.py

# =========
import sys
import os

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

import math
from fractions import Fraction

import numpy as np
import pytest

from core.constants import FIXTURE_PATHS
from core.coord_change import PointSet
from core.poly_core import MultiPoly, PolyMap, add, constant, eval_float_batch, gradient, variable
from core.serialization import pointset_from_json
from core.synth import build_saddle_field, certify_synthesis, point_minors, synthesize
from utils.exceptions import (
    DimensionMismatchError,
    MalformedInputError,
    NonFiniteInputError,
    UnsupportedOperationError,
)
from utils.utility import _read_json

# ==== UNITS TO BE TESTED ====
from core.verify import (
    CONVERGED_TO,
    DIVERGED,
    MAX_TIME_REACHED,
    BoxSpec,
    FlowTrace,
    VerifyConfig,
    basin_raster,
    basin_sample,
    certify_polynomial,
    classify_seeds,
    eigen_signs,
    fd_gradient_check,
    field_jacobian,
    integrate_flow,
    jacobian_signs,
    lyapunov_violations,
    newton_from_seeds,
    newton_search,
)

# ==== UNITS TO BE TESTED ====


# =============================================== UTILITY ====================================================
X1, X2 = variable(2, 0), variable(2, 1)
CONTRACTION = PolyMap(2, [-X1, -X2])


def load_points(key: str) -> PointSet:
    return pointset_from_json(_read_json(FIXTURE_PATHS[key]))


def half_norm_squared(n: int) -> MultiPoly:
    p = constant(n, 0)
    for i in range(n):
        p = p + variable(n, i) ** 2 * Fraction(1, 2)
    return p


def generate_ids(cases: list) -> list:
    return [f"num_{i}_{str(case[0]).replace(' ', '')[:24]}" for i, case in enumerate(cases, start=1)]


@pytest.fixture(scope="module")
def vertical_pair():
    return synthesize(load_points("vertical_pair"))


@pytest.fixture(scope="module")
def axis_pair():
    return synthesize(load_points("axis_pair"))


# =============================================================================================================


# =============================================== CONFIG AND BOX ==============================================
@pytest.mark.verify
def test_verify_config_overrides():
    config = VerifyConfig().with_overrides(dt=0.01, t_max=None)
    assert config.dt == 0.01
    assert config.t_max == VerifyConfig().t_max
    assert config.to_dict()["dt"] == 0.01


BAD_OVERRIDES = [
    ({"dt": -1.0}, "negative_dt"),
    ({"residual_tol": 0.0}, "zero_tolerance"),
    ({"seeds_per_axis": 1}, "one_seed"),
    ({"t_max": float("inf")}, "infinite_horizon"),
    ({"seed": -3}, "negative_seed"),
    ({"no_such_knob": 1}, "unknown_key"),
]


@pytest.mark.verify
@pytest.mark.parametrize("overrides, _name", BAD_OVERRIDES, ids=[c[1] for c in BAD_OVERRIDES])
def test_verify_config_rejects(overrides, _name):
    with pytest.raises(MalformedInputError):
        VerifyConfig().with_overrides(**overrides)


@pytest.mark.verify
def test_box_from_points():
    box = BoxSpec.from_points([(-1, 0), (1, 0)])
    assert box.lower == (-3.0, -1.0)
    assert box.upper == (3.0, 1.0)
    wide = box.inflated(10)
    assert wide.lower == (-30.0, -10.0) and wide.upper == (30.0, 10.0)
    assert list(box.contains([[0.0, 0.0], [3.5, 0.0], [np.nan, 0.0]])) == [True, False, False]


@pytest.mark.verify
def test_box_grid_order():
    grid = BoxSpec((0, 0), (1, 1)).grid(2)
    np.testing.assert_array_equal(grid, [[0, 0], [0, 1], [1, 0], [1, 1]])


@pytest.mark.verify
@pytest.mark.parametrize(
    "lower, upper",
    [((0, 0), (1,)), ((1, 0), (0, 1)), ((0, 0), (math.inf, 1))],
    ids=["ragged", "inverted", "infinite"],
)
def test_box_rejects(lower, upper):
    with pytest.raises(MalformedInputError):
        BoxSpec(lower, upper)


# =============================================================================================================


# =============================================== FINITE DIFFERENCES ==========================================
@pytest.mark.verify
def test_fd_on_quadratic():
    p = X1 ** 2 + 3 * X1 * X2
    assert fd_gradient_check(p, [1.0, 2.0]) <= 1e-8
    assert fd_gradient_check(constant(2, 5), [0.3, -0.7]) == 0.0


@pytest.mark.verify
def test_fd_on_alpha_x_building_block():
    # f from alpha = x; its x-derivative vanishes at the origin
    f = (X1 - (X1 - 1) ** 2 * X2) ** 2 - (X1 ** 3 * Fraction(1, 3) - X1 ** 2 * Fraction(1, 2))
    assert fd_gradient_check(f, [0.0, 0.0]) <= 1e-8


@pytest.mark.verify
def test_fd_input_errors():
    with pytest.raises(MalformedInputError):
        fd_gradient_check(X1, [0.0, 0.0], h=0.0)
    with pytest.raises(DimensionMismatchError):
        fd_gradient_check(X1, [0.0])
    with pytest.raises(NonFiniteInputError):
        fd_gradient_check(X1, [np.inf, 0.0])


@pytest.mark.verify
@pytest.mark.parametrize("name", ["vertical_pair", "axis_pair"])
def test_fd_agrees_with_symbolic_gradient_of_p(name, request):
    result = request.getfixturevalue(name)
    box = BoxSpec.from_points(result.input.points)
    rng = np.random.default_rng(0)
    errors = [fd_gradient_check(result.p_poly, x) for x in box.sample(100, rng)]
    assert max(errors) <= 1e-5, f"worst relative error {max(errors):.3e}"
    for x in result.input.as_floats():
        assert fd_gradient_check(result.p_poly, x) <= 1e-5


# =============================================================================================================


# =============================================== EIGENVALUES =================================================
EIGEN_CASES = [
    ([[3, -2], [-2, 2]], (2, 0, 0)),
    ([[1, 0], [0, -1]], (1, 1, 0)),
    (-np.eye(3), (0, 3, 0)),
    ([[0, 0], [0, 1]], (1, 0, 1)),
    ([[-1, 5], [0, -2]], (0, 2, 0)),
]


@pytest.mark.verify
@pytest.mark.parametrize("matrix, expected", EIGEN_CASES, ids=generate_ids(EIGEN_CASES))
def test_eigen_signs(matrix, expected):
    assert eigen_signs(matrix) == expected


@pytest.mark.verify
def test_eigen_signs_needs_square():
    with pytest.raises(DimensionMismatchError):
        eigen_signs([[1, 2, 3]])


@pytest.mark.verify
@pytest.mark.parametrize("key", ["origin_2d", "vertical_pair", "triangle", "space_pair"])
def test_negative_gradient_is_contracting_at_x(key):
    result = synthesize(load_points(key))
    n = result.dimension
    for x in result.input.as_floats():
        assert jacobian_signs(result.grad_field, x) == (0, n, 0)


@pytest.mark.verify
def test_field_jacobian_of_saddle_field():
    sf = build_saddle_field(load_points("axis_pair"))
    np.testing.assert_allclose(field_jacobian(sf.field, [0.0, 0.0]), [[1.0, 0.0], [0.0, -1.0]])
    assert jacobian_signs(sf.field, [1.0, 0.0]) == (0, 2, 0)


# =============================================================================================================


# =============================================== NEWTON ======================================================
@pytest.mark.verify
def test_newton_on_round_bowl():
    outcome = newton_search(gradient(half_norm_squared(3)), BoxSpec((-1,) * 3, (1,) * 3), seeds_per_axis=3)
    assert outcome.seeds_used == 27
    assert len(outcome.points) == 1
    assert np.linalg.norm(outcome.points[0]) < 1e-12
    assert outcome.singular_seeds == 0


@pytest.mark.verify
def test_newton_rejects_tiny_grid():
    with pytest.raises(MalformedInputError):
        newton_search(gradient(half_norm_squared(2)), BoxSpec((-1, -1), (1, 1)), seeds_per_axis=1)


@pytest.mark.verify
def test_newton_counts_singular_hessians():
    # Hessian of x1^3 + x2^3 + x1 vanishes at the origin
    grad = gradient(X1 ** 3 + X2 ** 3 + X1)
    outcome = newton_from_seeds(grad, [[0.0, 0.0]])
    assert outcome.singular_seeds == 1
    assert not outcome.converged_mask[0]


@pytest.mark.verify
def test_newton_recovers_x_from_nearby_seeds(vertical_pair):
    rng = np.random.default_rng(1)
    targets = np.array(vertical_pair.input.as_floats())
    seeds = np.repeat(targets, 10, axis=0) + rng.uniform(-0.01, 0.01, size=(20, 2))
    outcome = newton_from_seeds(gradient(vertical_pair.p_poly), seeds)
    assert outcome.converged_mask.all()
    assert outcome.iterations.max() <= 20
    owners = np.repeat(np.arange(2), 10)
    errors = np.linalg.norm(outcome.finals - targets[owners], axis=1)
    assert errors.max() < 1e-8


@pytest.mark.verify
@pytest.mark.parametrize("key", ["origin_2d", "axis_pair", "vertical_pair"])
def test_certify_synthesized_polynomial(key):
    result = synthesize(load_points(key))
    report = certify_polynomial(
        result.p_poly, result.input.points, config=VerifyConfig(seeds_per_axis=6), stored_minors=point_minors(result)
    )
    assert report.overall_pass, report.failures()
    assert report.failures() == []
    for q in report.spurious_search.converged_points:
        assert min(np.linalg.norm(np.array(q) - np.array(result.input.as_floats()), axis=1)) <= 1e-6


@pytest.mark.verify
@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10), ids=[f"seed_{s}" for s in range(10)])
def test_newton_grid_finds_only_x(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    points = set()
    while len(points) < k:
        points.add(tuple(int(v) for v in rng.integers(-3, 4, size=2)))
    xs = PointSet(2, tuple(tuple(Fraction(v) for v in p) for p in sorted(points)))
    result = synthesize(xs)
    outcome = newton_search(
        gradient(result.p_poly), BoxSpec.from_points(xs.points), seeds_per_axis=100
    )
    assert outcome.seeds_used == 10000
    targets = np.array(xs.as_floats())
    assert outcome.points
    for q in outcome.points:
        assert np.min(np.linalg.norm(targets - np.asarray(q), axis=1)) <= 1e-6


@pytest.mark.verify
def test_certify_synthesis_matches_direct_call():
    result = synthesize(load_points("axis_pair"))
    config = VerifyConfig(seeds_per_axis=4)
    report = certify_synthesis(result, config=config)
    direct = certify_polynomial(result.p_poly, result.input.points, config=config)
    assert report.overall_pass
    assert len(report.per_point) == 2
    assert report.spurious_search.seeds_used == direct.spurious_search.seeds_used == 16


@pytest.mark.verify
def test_certify_flags_tampered_polynomial():
    result = synthesize(load_points("origin_2d"))
    report = certify_polynomial(add(result.p_poly, X1), result.input.points, config=VerifyConfig(seeds_per_axis=4))
    assert not report.overall_pass
    assert any("gradient" in reason for reason in report.failures())


@pytest.mark.verify
def test_certify_flags_wrong_stored_minors():
    result = synthesize(load_points("origin_2d"))
    report = certify_polynomial(
        result.p_poly, result.input.points, config=VerifyConfig(seeds_per_axis=4), stored_minors=[["-3", "2"]]
    )
    assert not report.overall_pass
    assert report.per_point[0].stored_minors_match is False


@pytest.mark.verify
def test_certify_folds_consistency_checks():
    result = synthesize(load_points("origin_2d"))
    report = certify_polynomial(
        result.p_poly, result.input.points, config=VerifyConfig(seeds_per_axis=4), consistency={"round_trip": False}
    )
    assert not report.overall_pass
    assert report.failures() == ["consistency check failed: round_trip"]


# =============================================================================================================


# =============================================== FLOWS =======================================================
@pytest.mark.verify
def test_flow_matches_exponential_decay():
    trace = integrate_flow(CONTRACTION, (1.0, 1.0), dt=1e-3, t_max=2.0, targets=[(0.0, 0.0)])
    assert trace.classified == MAX_TIME_REACHED
    assert trace.steps == 2000
    assert trace.time == pytest.approx(2.0)
    np.testing.assert_allclose(trace.end, [math.exp(-2.0)] * 2, rtol=1e-8)


@pytest.mark.verify
def test_flow_converges_to_target():
    trace = integrate_flow(CONTRACTION, (1.0, 1.0), dt=1e-2, t_max=30.0, targets=[(5.0, 5.0), (0.0, 0.0)])
    assert trace.classified == CONVERGED_TO
    assert trace.target_index == 1
    assert trace.final_grad_norm < 1e-8
    assert not trace.halved


@pytest.mark.verify
def test_flow_at_equilibrium_takes_no_steps():
    trace = integrate_flow(CONTRACTION, (0.0, 0.0), targets=[(0.0, 0.0)])
    assert trace.converged
    assert trace.steps == 0


@pytest.mark.verify
def test_flow_reports_divergence():
    # x' = x^2 blows up in finite time from x = 1
    blow_up = PolyMap(2, [X1 ** 2, -X2])
    trace = integrate_flow(blow_up, (1.0, 0.0), dt=1e-2, t_max=5.0, targets=[(0.0, 0.0)])
    assert trace.classified == DIVERGED
    assert trace.halved
    assert trace.note
    assert trace.halvings == VerifyConfig().max_halvings
    assert trace.dt == pytest.approx(1e-2 / 2 ** trace.halvings)
    assert np.all(np.isfinite(trace.end))


@pytest.mark.verify
def test_flow_through_stiff_corner(axis_pair):
    # f_yy = 2 beta^4 is about 6e4 near x = -2.9, far outside the RK4 stability interval at dt = 1e-2
    xs = axis_pair.input
    trace = integrate_flow(
        axis_pair.grad_field,
        (-2.9, 0.9),
        dt=1e-2,
        t_max=200.0,
        targets=xs.as_floats(),
        box=BoxSpec.from_points(xs.points),
        potential=axis_pair.p_poly,
    )
    assert trace.classified == CONVERGED_TO
    assert trace.target_index == 0
    assert trace.halvings == 0
    assert trace.time <= 200.0
    assert lyapunov_violations(trace) == []


@pytest.mark.verify
def test_flow_input_errors():
    with pytest.raises(DimensionMismatchError):
        integrate_flow(CONTRACTION, (1.0,))
    with pytest.raises(NonFiniteInputError):
        integrate_flow(CONTRACTION, (np.nan, 0.0))
    with pytest.raises(MalformedInputError):
        integrate_flow(CONTRACTION, (1.0, 0.0), dt=-1.0)


@pytest.mark.verify
def test_saddle_field_flow_picks_the_right_minimum():
    sf = build_saddle_field(load_points("axis_pair"))
    trace = integrate_flow(sf.pulled_back, (0.1, 0.5), dt=1e-2, t_max=40.0, targets=[(-1.0, 0.0), (1.0, 0.0)])
    assert trace.classified == CONVERGED_TO
    assert trace.target_index == 1


@pytest.mark.verify
def test_saddle_field_flow_on_the_separatrix():
    sf = build_saddle_field(load_points("axis_pair"))
    trace = integrate_flow(
        sf.pulled_back,
        (0.0, 0.5),
        dt=1e-2,
        t_max=40.0,
        targets=[(-1.0, 0.0), (1.0, 0.0)],
        saddles=[(0.0, 0.0)],
    )
    assert trace.classified == MAX_TIME_REACHED
    assert trace.note == "settled at saddle 0"
    assert trace.target_index is None


@pytest.mark.verify
def test_gradient_flow_decreases_p(vertical_pair):
    targets = vertical_pair.input.as_floats()
    trace = integrate_flow(
        vertical_pair.grad_field, (0.02, 0.01), dt=1e-2, t_max=20.0, targets=targets, potential=vertical_pair.p_poly
    )
    assert trace.classified != DIVERGED
    assert len(trace.potential_values) == len(trace.sample_steps) > 1
    assert lyapunov_violations(trace) == []
    np.testing.assert_allclose(
        trace.potential_values, eval_float_batch(vertical_pair.p_poly, np.array(trace.samples)), rtol=0, atol=0
    )


@pytest.mark.verify
def test_lyapunov_violations_on_rising_potential():
    trace = FlowTrace(
        start=(0.0,),
        steps=20,
        end=(0.0,),
        classified=MAX_TIME_REACHED,
        final_grad_norm=0.0,
        sample_steps=[0, 10, 20],
        potential_values=[1.0, 0.5, 0.7],
    )
    assert lyapunov_violations(trace) == [2]
    assert lyapunov_violations(trace, tol=1.0) == []


# =============================================================================================================


# =============================================== BASINS ======================================================
@pytest.mark.verify
def test_basin_sample_single_point():
    sf = build_saddle_field(load_points("origin_2d"))
    box = BoxSpec.from_points(sf.stable_points_original())
    sample = basin_sample(sf.pulled_back, load_points("origin_2d"), box, num_seeds=50, seed=3, dt=1e-2, t_max=30.0)
    assert sample.fraction == 1.0
    assert sample.per_target == [50]
    assert sample.counts == {CONVERGED_TO: 50, MAX_TIME_REACHED: 0, DIVERGED: 0}


@pytest.mark.verify
@pytest.mark.slow
def test_basin_sample_two_minima_with_saddle():
    xs = load_points("axis_pair")
    sf = build_saddle_field(xs)
    box = BoxSpec.from_points(xs.points)
    sample = basin_sample(sf.pulled_back, xs, box, num_seeds=200, seed=0, dt=1e-2, t_max=40.0)
    assert sample.fraction >= 0.99
    assert sample.counts[DIVERGED] == 0
    assert min(sample.per_target) > 0


@pytest.mark.verify
@pytest.mark.slow
@pytest.mark.parametrize("name", ["axis_pair", "vertical_pair"])
def test_gradient_basin_of_synthesized_p(name, request):
    result = request.getfixturevalue(name)
    xs = result.input
    for x in xs.as_floats():
        assert jacobian_signs(result.grad_field, x) == (0, xs.dimension, 0)

    sample = basin_sample(
        result.grad_field,
        xs,
        BoxSpec.from_points(xs.points),
        num_seeds=1000,
        seed=0,
        t_max=200.0,
        potential=result.p_poly,
    )
    assert sample.seeds_used == 1000
    assert sample.passed, sample.counts
    assert sample.fraction >= 0.95
    assert min(sample.per_target) > 0
    # every step of every trace, P non-increasing within 1e-9 * max(1, |P|)
    assert sample.lyapunov_rises == 0
    assert list(sample.detail.lyapunov_rises) == [0] * 1000

    # P is unbounded below off the box; a diverged seed must be a finite, monotone descent past every minimum
    floor = float(eval_float_batch(result.p_poly, np.array(xs.as_floats())).min())
    escaped = np.array([c == DIVERGED for c in sample.detail.classified])
    ends = sample.detail.ends[escaped]
    assert np.all(np.isfinite(ends))
    if escaped.any():
        assert np.all(eval_float_batch(result.p_poly, ends) < floor)


@pytest.mark.verify
def test_basin_sample_is_deterministic():
    xs = load_points("axis_pair")
    sf = build_saddle_field(xs)
    box = BoxSpec.from_points(xs.points)
    first = basin_sample(sf.pulled_back, xs, box, num_seeds=20, seed=11, dt=1e-2, t_max=5.0)
    second = basin_sample(sf.pulled_back, xs, box, num_seeds=20, seed=11, dt=1e-2, t_max=5.0)
    assert first == second


@pytest.mark.verify
def test_basin_sample_needs_seeds():
    with pytest.raises(MalformedInputError):
        basin_sample(CONTRACTION, [(0, 0)], BoxSpec((-1, -1), (1, 1)), num_seeds=0)


@pytest.mark.verify
def test_classify_seeds_labels():
    seeds = [[0.5, 0.5], [-0.25, 0.75]]
    result = classify_seeds(CONTRACTION, seeds, [(0.0, 0.0)], BoxSpec((-1, -1), (1, 1)), dt=1e-2, t_max=30.0)
    assert list(result.labels) == [0, 0]
    assert result.counts()[CONVERGED_TO] == 2


@pytest.mark.verify
def test_basin_raster_planar_only():
    field_3d = PolyMap(3, [-variable(3, i) for i in range(3)])
    with pytest.raises(UnsupportedOperationError):
        basin_raster(field_3d, [(0, 0, 0)], BoxSpec((-1,) * 3, (1,) * 3), 8)
    with pytest.raises(MalformedInputError):
        basin_raster(CONTRACTION, [(0, 0)], BoxSpec((-1, -1), (1, 1)), 1)


@pytest.mark.verify
def test_basin_raster_labels(axis_pair):
    xs = axis_pair.input
    raster = basin_raster(axis_pair.grad_field, xs, BoxSpec.from_points(xs.points), 8, dt=1e-3, t_max=1.0)
    assert raster.seeds.shape == (64, 2)
    assert set(raster.labels.tolist()) <= {-1, 0, 1}


# =============================================================================================================
