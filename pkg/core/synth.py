# __file__: synth.py
#
# __brief__:
#     Top-level constructions:
#         P = Q o F with Q(x) = f(x1, x2) + 1/2 * sum_{i>2} xi^2  (minima exactly on X, no other critical points)
#         g = -grad P                                             (X are asymptotically stable equilibria)
#         (gamma(x1), -x2, ..., -xn)                              (stable on X, saddles between consecutive points)

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

from core import exact_linalg
from core.coord_change import CoordChange, PointSet, build_coord_change, pull_back
from core.morse_scalar import AlphaSpec, MorsePair, build_alpha, build_f
from core.poly_core import (
    MultiPoly,
    PolyMap,
    compose_map,
    constant,
    embed,
    eval_map_rational,
    eval_rational,
    gradient,
    hessian,
    partial,
    to_rational,
    variable,
)
from core.verify import BoxSpec, CertReport, VerifyConfig, certify_polynomial, jacobian_signs
from utils.logger import setup_logger

# ==========
synth_logger = setup_logger(name="synth.py_logger", log_file="synth.log")
# ==========

synth_logger.info("synth_logger")

_PLANE = (0, 1)
_X_ONLY = (0,)
_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class SynthesisResult:
    """Everything built on the way to P, kept for audit."""

    input: PointSet
    change: CoordChange
    alpha_spec: AlphaSpec
    morse: MorsePair
    q: MultiPoly
    p_poly: MultiPoly
    grad_field: PolyMap  # -grad P

    @property
    def dimension(self) -> int:
        return self.input.dimension

    @cached_property
    def symbolic_hessian(self) -> Tuple[Tuple[MultiPoly, ...], ...]:
        return hessian(self.p_poly)


@dataclass(frozen=True)
class DegreeAudit:
    deg_f: int
    max_deg_forward: int
    deg_p: int

    @property
    def bound(self) -> int:
        return self.deg_f * self.max_deg_forward

    @property
    def within_bound(self) -> bool:
        return self.deg_p <= self.bound


# ==================================================================== P = Q o F
def build_q(f: MultiPoly, n: int) -> MultiPoly:
    """f(x1, x2) + 1/2 * (x3^2 + ... + xn^2); equal to f lifted when n == 2."""
    q = embed(f, n, _PLANE)
    for i in range(2, n):
        q = q + variable(n, i) ** 2 * _HALF
    return q


def synthesize(xs: PointSet) -> SynthesisResult:
    """Polynomial with strict local minima exactly on X and no other critical points.

    Args:
        xs (PointSet): k pairwise distinct rational points in R^n, n >= 2

    Returns:
        SynthesisResult: input, F, alpha, f, Q, P and -grad P
    """
    n = xs.dimension
    change = build_coord_change(xs)
    spec = AlphaSpec.from_values(change.axis_images)
    morse = build_f(build_alpha(spec))
    q = build_q(morse.f, n)
    p_poly = pull_back(q, change)
    grad_field = -gradient(p_poly)

    synth_logger.info(
        f"synthesize: n={n}, k={xs.k}, deg F={change.forward.degree}, deg f={morse.f.degree}, "
        f"deg P={p_poly.degree}, {len(p_poly)} terms"
    )
    return SynthesisResult(
        input=xs,
        change=change,
        alpha_spec=spec,
        morse=morse,
        q=q,
        p_poly=p_poly,
        grad_field=grad_field,
    )


def hessian_at(result: SynthesisResult, x: Sequence) -> List[List[Fraction]]:
    """Exact Hessian of P at x from the symbolic second partials."""
    point = [to_rational(v) for v in x]
    return [[eval_rational(entry, point) for entry in row] for row in result.symbolic_hessian]


def transported_hessian(result: SynthesisResult, x: Sequence) -> List[List[Fraction]]:
    """J^T H_Q(F(x)) J with J the Jacobian of F at x (the oracle for hessian_at at critical points)."""
    point = [to_rational(v) for v in x]
    jac = [[eval_rational(entry, point) for entry in row] for row in result.change.forward.jacobian()]
    image = eval_map_rational(result.change.forward, point)
    h_q = [[eval_rational(entry, image) for entry in row] for row in hessian(result.q)]
    return exact_linalg.matmul(exact_linalg.transpose(jac), exact_linalg.matmul(h_q, jac))


def gradient_field(result: SynthesisResult) -> PolyMap:
    return PolyMap(result.dimension, (-partial(result.p_poly, i) for i in range(result.dimension)))


def point_minors(result: SynthesisResult) -> List[List[Fraction]]:
    """Leading principal minors of the Hessian at every input point, in input order."""
    return [exact_linalg.leading_minors(hessian_at(result, x)) for x in result.input.points]


def degree_audit(result: SynthesisResult) -> DegreeAudit:
    audit = DegreeAudit(
        deg_f=result.morse.f.degree,
        max_deg_forward=result.change.forward.degree,
        deg_p=result.p_poly.degree,
    )
    if not audit.within_bound:
        synth_logger.error(f"degree_audit: deg P={audit.deg_p} exceeds bound {audit.bound}")
    return audit


def certify_synthesis(
    result: SynthesisResult,
    box: Optional[BoxSpec] = None,
    config: Optional[VerifyConfig] = None,
) -> CertReport:
    return certify_polynomial(result.p_poly, result.input.points, box=box, config=config)


# ==================================================================== saddle-augmented field
@dataclass(frozen=True)
class SaddleField:
    gamma: MultiPoly  # dimension 1
    field: PolyMap  # transformed coordinates
    stable_set: Tuple[Fraction, ...]  # sorted axis images a_i
    saddle_set: Tuple[Fraction, ...]  # b_i = (a_i + a_{i+1}) / 2
    change: CoordChange
    pulled_back: PolyMap  # the same flow in original coordinates

    @property
    def dimension(self) -> int:
        return self.field.domain_dim

    def _on_axis(self, values: Sequence[Fraction]) -> List[Tuple[Fraction, ...]]:
        tail = (Fraction(0),) * (self.dimension - 1)
        return [(v,) + tail for v in values]

    def stable_points(self) -> List[Tuple[Fraction, ...]]:
        return self._on_axis(self.stable_set)

    def saddle_points(self) -> List[Tuple[Fraction, ...]]:
        return self._on_axis(self.saddle_set)

    def stable_points_original(self) -> List[Tuple[Fraction, ...]]:
        return [eval_map_rational(self.change.inverse, z) for z in self.stable_points()]

    def saddle_points_original(self) -> List[Tuple[Fraction, ...]]:
        return [eval_map_rational(self.change.inverse, z) for z in self.saddle_points()]


def build_gamma(stable: Sequence[Fraction], saddles: Sequence[Fraction]) -> MultiPoly:
    """-prod (x - a_i) * prod (x - b_i)."""
    x = variable(1, 0)
    gamma = constant(1, -1)
    for root in list(stable) + list(saddles):
        gamma = gamma * (x - root)
    return gamma


def pull_back_field(field_map: PolyMap, change: CoordChange) -> PolyMap:
    """x' = J_{F^-1}(F(x)) * g(F(x)), the field conjugated back to original coordinates."""
    n = field_map.domain_dim
    jac_inverse = change.inverse.jacobian()
    in_z = []
    for row in jac_inverse:
        comp = constant(n, 0)
        for entry, g_j in zip(row, field_map.components):
            comp = comp + entry * g_j
        in_z.append(comp)
    return compose_map(PolyMap(n, in_z), change.forward)


def build_saddle_field(xs: PointSet) -> SaddleField:
    """Field with stable equilibria on X and one saddle between consecutive axis images.

    The coordinate change is the one synthesize() uses.
    """
    n = xs.dimension
    change = build_coord_change(xs)
    stable = tuple(sorted(change.axis_images))
    saddles = tuple((a + b) / 2 for a, b in zip(stable, stable[1:]))
    gamma = build_gamma(stable, saddles)
    components = [embed(gamma, n, _X_ONLY)] + [-variable(n, i) for i in range(1, n)]
    field_map = PolyMap(n, components)
    pulled = pull_back_field(field_map, change)
    synth_logger.info(
        f"build_saddle_field: n={n}, k={len(stable)}, {len(saddles)} saddles, "
        f"deg gamma={gamma.degree}, deg pulled back={pulled.degree}"
    )
    return SaddleField(
        gamma=gamma,
        field=field_map,
        stable_set=stable,
        saddle_set=saddles,
        change=change,
        pulled_back=pulled,
    )


@dataclass(frozen=True)
class SaddleCensus:
    dimension: int
    gamma_roots_exact: bool  # gamma vanishes on X u X' and has no room for other roots
    slopes_ok: bool  # gamma' < 0 on X, > 0 on X'
    tail_is_contracting: bool  # components 2..n are exactly -x2, ..., -xn
    stable_patterns: Tuple[Tuple[int, int, int], ...]
    saddle_patterns: Tuple[Tuple[int, int, int], ...]
    pulled_back_vanishes: bool  # pulled-back field is exactly zero at F^-1 of every equilibrium

    @property
    def passed(self) -> bool:
        n = self.dimension
        return (
            self.gamma_roots_exact
            and self.slopes_ok
            and self.tail_is_contracting
            and all(p == (0, n, 0) for p in self.stable_patterns)
            and all(p == (1, n - 1, 0) for p in self.saddle_patterns)
            and self.pulled_back_vanishes
        )


def saddle_census(sf: SaddleField, tol: Optional[float] = None) -> SaddleCensus:
    """Exact equilibrium census of the saddle field plus float sign patterns of its Jacobian."""
    kwargs = {} if tol is None else {"tol": tol}
    n = sf.dimension
    roots = list(sf.stable_set) + list(sf.saddle_set)
    gamma_roots_exact = sf.gamma.degree == len(roots) and all(
        eval_rational(sf.gamma, [r]) == 0 for r in roots
    )
    slope = partial(sf.gamma, 0)
    slopes_ok = all(eval_rational(slope, [a]) < 0 for a in sf.stable_set) and all(
        eval_rational(slope, [b]) > 0 for b in sf.saddle_set
    )
    tail_is_contracting = all(sf.field[i] == -variable(n, i) for i in range(1, n))

    as_float = lambda point: [float(v) for v in point]  # noqa: E731
    stable_patterns = tuple(jacobian_signs(sf.field, as_float(z), **kwargs) for z in sf.stable_points())
    saddle_patterns = tuple(jacobian_signs(sf.field, as_float(z), **kwargs) for z in sf.saddle_points())

    originals = sf.stable_points_original() + sf.saddle_points_original()
    pulled_back_vanishes = all(
        all(v == 0 for v in eval_map_rational(sf.pulled_back, x)) for x in originals
    )
    census = SaddleCensus(
        dimension=n,
        gamma_roots_exact=gamma_roots_exact,
        slopes_ok=slopes_ok,
        tail_is_contracting=tail_is_contracting,
        stable_patterns=stable_patterns,
        saddle_patterns=saddle_patterns,
        pulled_back_vanishes=pulled_back_vanishes,
    )
    synth_logger.info(f"saddle_census: passed={census.passed}")
    return census
