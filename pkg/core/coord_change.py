# __file__: coord_change.py
#
# __brief__:
#     Polynomial automorphism F = Pi o T of R^n that sends a finite point set X
#     onto the first coordinate axis. T is linear with first row p (a direction
#     separating every pair of points), Pi is the triangular shear
#     (z1, ..., zn) -> (z1, z2 - p2(z1), ..., zn - pn(z1)) built from Lagrange interpolants.

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, count
from typing import List, Sequence, Tuple

from core import exact_linalg
from core.poly_core import (
    MultiPoly,
    PolyMap,
    compose,
    compose_map,
    constant,
    embed,
    eval_map_rational,
    to_rational,
    univariate,
    variable,
    zero,
)
from utils.exceptions import (
    DegenerateDirectionError,
    HypothesisViolationError,
    InterpolationNodeError,
)
from utils.logger import setup_logger

# ==========
coord_change_logger = setup_logger(
    name="coord_change.py_logger", log_file="coord_change.log"
)
# ==========

coord_change_logger.info("coord_change_logger")

Vector = Tuple[Fraction, ...]


@dataclass(frozen=True)
class PointSet:
    """k >= 1 pairwise distinct rational points in R^n, n >= 2."""

    dimension: int
    points: Tuple[Vector, ...]

    def __post_init__(self):
        if isinstance(self.dimension, bool) or not isinstance(self.dimension, int) or self.dimension < 2:
            raise HypothesisViolationError(
                "the construction needs a finite subset of R^n with n >= 2",
                dimension=self.dimension,
            )
        if not self.points:
            raise HypothesisViolationError("the point set is empty", dimension=self.dimension)

        points = tuple(tuple(to_rational(v) for v in point) for point in self.points)
        for i, point in enumerate(points):
            if len(point) != self.dimension:
                raise HypothesisViolationError(
                    "point has the wrong number of coordinates",
                    index=i,
                    length=len(point),
                    dimension=self.dimension,
                )
        seen = {}
        for i, point in enumerate(points):
            if point in seen:
                raise HypothesisViolationError(
                    "points must be pairwise distinct",
                    first=seen[point],
                    second=i,
                )
            seen[point] = i
        object.__setattr__(self, "points", points)

    @property
    def k(self) -> int:
        return len(self.points)

    def as_floats(self) -> List[List[float]]:
        return [[float(v) for v in point] for point in self.points]


@dataclass(frozen=True)
class CoordChange:
    forward: PolyMap  # F
    inverse: PolyMap  # F^-1
    direction: Vector  # p
    linear_part: Tuple[Vector, ...]  # T
    interpolants: Tuple[MultiPoly, ...]  # p_2 .. p_n, univariate
    axis_images: Tuple[Fraction, ...]  # first coordinates of F(X), in input order

    @property
    def dimension(self) -> int:
        return self.forward.domain_dim


# ==================================================================== direction and T
def _dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def choose_direction(xs: PointSet) -> Vector:
    """First p(t) = (1, t, t^2, ..., t^(n-1)), t = 0, 1, 2, ..., with p.(xi - eta) != 0 for all pairs.

    A nonzero difference gives a nonzero polynomial in t of degree <= n-1,
    so at most (n-1) * k(k-1)/2 values of t can fail.
    """
    differences = [
        tuple(a - b for a, b in zip(xi, eta)) for xi, eta in combinations(xs.points, 2)
    ]
    for t in count():
        p = tuple(Fraction(t) ** i for i in range(xs.dimension))
        if all(_dot(p, d) != 0 for d in differences):
            coord_change_logger.debug(f"choose_direction: t={t}, p={[str(v) for v in p]}")
            return p
    raise AssertionError("unreachable")  # pragma: no cover


def build_linear(p: Sequence[Fraction], n: int) -> List[List[Fraction]]:
    """T = rows [p; e2; ...; en], so det T = p1.

    Raises:
        DegenerateDirectionError: p1 == 0 or len(p) != n
    """
    if len(p) != n:
        raise DegenerateDirectionError("direction length differs from dimension", length=len(p), dimension=n)
    if p[0] == 0:
        raise DegenerateDirectionError("first entry of the direction must be nonzero", direction=[str(v) for v in p])
    rows = [[Fraction(v) for v in p]]
    for i in range(1, n):
        rows.append([Fraction(int(i == j)) for j in range(n)])
    return rows


def invert_linear(matrix: Sequence[Sequence[Fraction]]) -> List[List[Fraction]]:
    return exact_linalg.inverse(matrix)


def linear_polymap(matrix: Sequence[Sequence[Fraction]]) -> PolyMap:
    """z = M x as a PolyMap."""
    n = len(matrix[0])
    components = []
    for row in matrix:
        comp = zero(n)
        for j, coeff in enumerate(row):
            if coeff:
                comp = comp + variable(n, j) * coeff
        components.append(comp)
    return PolyMap(n, components)


# ==================================================================== interpolation and shear
def build_interpolants(z_points: Sequence[Sequence[Fraction]]) -> List[MultiPoly]:
    """For j = 2..n, the degree <= k-1 polynomial p_j with p_j(z1^(i)) = zj^(i).

    Uses the classical Lagrange basis prod_{m != i} (z - z1^(m)) / (z1^(i) - z1^(m)).

    Raises:
        InterpolationNodeError: two nodes share a first coordinate
    """
    nodes = [Fraction(z[0]) for z in z_points]
    if len(set(nodes)) != len(nodes):
        raise InterpolationNodeError(
            "interpolation nodes must have distinct first coordinates",
            nodes=[str(v) for v in nodes],
        )
    n = len(z_points[0])
    z = variable(1, 0)

    basis = []
    for i, node in enumerate(nodes):
        numerator = constant(1, 1)
        denominator = Fraction(1)
        for m, other in enumerate(nodes):
            if m != i:
                numerator = numerator * (z - other)
                denominator *= node - other
        basis.append(numerator * (1 / denominator))

    interpolants = []
    for j in range(1, n):
        p_j = zero(1)
        for i, point in enumerate(z_points):
            if point[j]:
                p_j = p_j + basis[i] * Fraction(point[j])
        interpolants.append(p_j)
    return interpolants


def _shear(interpolants: Sequence[MultiPoly], n: int, sign: int) -> PolyMap:
    components = [variable(n, 0)]
    for j, p_j in enumerate(interpolants, start=1):
        lifted = embed(p_j, n, (0,))
        components.append(variable(n, j) + lifted * sign)
    return PolyMap(n, components)


def build_shear(interpolants: Sequence[MultiPoly], n: int) -> PolyMap:
    """Pi: z -> (z1, z2 - p2(z1), ..., zn - pn(z1))."""
    return _shear(interpolants, n, -1)


def build_shear_inverse(interpolants: Sequence[MultiPoly], n: int) -> PolyMap:
    """Pi^-1: z -> (z1, z2 + p2(z1), ..., zn + pn(z1))."""
    return _shear(interpolants, n, 1)


# ==================================================================== assembly
def build_coord_change(xs: PointSet) -> CoordChange:
    """F = Pi o T with polynomial inverse T^-1 o Pi^-1."""
    n = xs.dimension
    p = choose_direction(xs)
    t_matrix = build_linear(p, n)
    t_inverse = invert_linear(t_matrix)

    z_points = [exact_linalg.matvec(t_matrix, x) for x in xs.points]
    interpolants = build_interpolants(z_points)

    t_map = linear_polymap(t_matrix)
    t_inverse_map = linear_polymap(t_inverse)
    forward = compose_map(build_shear(interpolants, n), t_map)
    inverse = compose_map(t_inverse_map, build_shear_inverse(interpolants, n))

    axis_images = tuple(z[0] for z in z_points)
    coord_change_logger.info(
        f"build_coord_change: n={n}, k={xs.k}, p={[str(v) for v in p]}, deg F={forward.degree}"
    )
    return CoordChange(
        forward=forward,
        inverse=inverse,
        direction=p,
        linear_part=tuple(tuple(row) for row in t_matrix),
        interpolants=tuple(interpolants),
        axis_images=axis_images,
    )


def apply_forward(change: CoordChange, xs: PointSet) -> List[Vector]:
    """Exact images F(x) for x in X."""
    return [eval_map_rational(change.forward, x) for x in xs.points]


def is_identity_map(m: PolyMap) -> bool:
    return m.is_identity()


def round_trip_is_identity(change: CoordChange) -> bool:
    """F o F^-1 and F^-1 o F both reduce to the coordinate polynomials."""
    return (
        compose_map(change.forward, change.inverse).is_identity()
        and compose_map(change.inverse, change.forward).is_identity()
    )


def jacobian_determinant(m: PolyMap) -> MultiPoly:
    """Symbolic det of the Jacobian of a square polynomial map."""
    return exact_linalg.cofactor_determinant(m.jacobian())


def pull_back(p: MultiPoly, change: CoordChange) -> MultiPoly:
    """p o F."""
    return compose(p, change.forward)
