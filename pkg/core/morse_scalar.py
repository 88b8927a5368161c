# __file__: morse_scalar.py
#
# __brief__:
#     The planar building block: from a univariate alpha with simple zeroes, build
#         f(x, y) = (alpha(x) - beta(x)^2 y)^2 - int alpha(x) beta(x) dx,   beta = alpha - alpha'
#     whose critical points are exactly {(a, 0) : alpha(a) = 0}, all strict local minima.

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.exact_linalg import determinant
from core.poly_core import (
    MultiPoly,
    antiderivative,
    constant,
    embed,
    eval_rational,
    gradient,
    hessian,
    partial,
    to_rational,
    univariate,
    univariate_coefficients,
    variable,
)
from core.verify import BoxSpec, CertReport, VerifyConfig, certify_polynomial
from utils.exceptions import (
    ConstantAlphaError,
    DimensionMismatchError,
    EmptyRootListError,
    HypothesisViolationError,
    RepeatedRootError,
)
from utils.logger import setup_logger

# ==========
morse_scalar_logger = setup_logger(
    name="morse_scalar.py_logger", log_file="morse_scalar.log"
)
# ==========

morse_scalar_logger.info("morse_scalar_logger")

# Placements of the univariate pieces inside the (x, y) plane
_X_ONLY = (0,)

_ROOT_IMAG_TOL: float = 1e-7
_ROOT_MAX_DENOMINATOR: int = 10 ** 6


@dataclass(frozen=True)
class AlphaSpec:
    """The root set {a_1 < ... < a_k} of alpha(x) = prod(x - a_i)."""

    roots: Tuple[Fraction, ...]

    def __post_init__(self):
        if not self.roots:
            raise EmptyRootListError("alpha needs at least one root", function="AlphaSpec")
        object.__setattr__(self, "roots", tuple(to_rational(r) for r in self.roots))
        for left, right in zip(self.roots, self.roots[1:]):
            if not left < right:
                raise HypothesisViolationError(
                    "roots must be strictly increasing (distinct and sorted)",
                    left=str(left),
                    right=str(right),
                )

    @classmethod
    def from_values(cls, values: Iterable) -> "AlphaSpec":
        """Sort the given roots; duplicates are rejected by the strict-increase check."""
        return cls(tuple(sorted(to_rational(v) for v in values)))

    @property
    def k(self) -> int:
        return len(self.roots)


@dataclass(frozen=True)
class MorsePair:
    alpha: MultiPoly  # dimension 1
    beta: MultiPoly  # dimension 1, alpha - alpha'
    f: MultiPoly  # dimension 2, variables (x, y)

    @property
    def k(self) -> int:
        return self.alpha.degree


# ==================================================================== univariate helpers
def _univariate_divmod(a: MultiPoly, b: MultiPoly) -> Tuple[MultiPoly, MultiPoly]:
    if b.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    remainder = univariate_coefficients(a) if not a.is_zero() else []
    divisor = univariate_coefficients(b)
    lead = divisor[-1]
    quotient = [Fraction(0)] * max(len(remainder) - len(divisor) + 1, 1)
    while len(remainder) >= len(divisor) and any(remainder):
        shift = len(remainder) - len(divisor)
        factor = remainder[-1] / lead
        quotient[shift] = factor
        for i, c in enumerate(divisor):
            remainder[shift + i] -= factor * c
        while remainder and remainder[-1] == 0:
            remainder.pop()
    return univariate(quotient), univariate(remainder)


def univariate_gcd(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    """Monic gcd by the exact Euclidean algorithm (zero if both are zero)."""
    for p in (a, b):
        if p.dimension != 1:
            raise DimensionMismatchError("gcd is only defined for univariate polynomials", dimension=p.dimension)
    while not b.is_zero():
        _, r = _univariate_divmod(a, b)
        a, b = b, r
    if a.is_zero():
        return a
    return a * (1 / univariate_coefficients(a)[-1])


def has_simple_zeroes(alpha: MultiPoly) -> bool:
    return univariate_gcd(alpha, partial(alpha, 0)).degree == 0


# ==================================================================== construction
def build_alpha(spec: AlphaSpec) -> MultiPoly:
    """alpha(x) = prod (x - a_i), monic of degree k."""
    if not spec.roots:
        raise EmptyRootListError("alpha needs at least one root", function="build_alpha()")
    x = variable(1, 0)
    alpha = constant(1, 1)
    for root in spec.roots:
        alpha = alpha * (x - root)
    morse_scalar_logger.info(f"build_alpha: k={spec.k}, alpha={alpha.to_text(['x'])}")
    return alpha


def build_f(alpha: MultiPoly) -> MorsePair:
    """Assemble beta and f from alpha.

    Args:
        alpha (MultiPoly): univariate, nonconstant, simple zeroes

    Raises:
        DimensionMismatchError: alpha is not univariate
        ConstantAlphaError: alpha is constant
        RepeatedRootError: gcd(alpha, alpha') is not constant

    Returns:
        MorsePair: alpha, beta = alpha - alpha', f in variables (x, y)
    """
    if alpha.dimension != 1:
        raise DimensionMismatchError("alpha must be univariate", dimension=alpha.dimension, function="build_f()")
    if alpha.is_constant():
        raise ConstantAlphaError("alpha must be nonconstant", alpha=alpha.to_text(["x"]))
    if not has_simple_zeroes(alpha):
        raise RepeatedRootError(
            "alpha has a repeated root",
            alpha=alpha.to_text(["x"]),
            gcd=univariate_gcd(alpha, partial(alpha, 0)).to_text(["x"]),
        )

    beta = alpha - partial(alpha, 0)
    integral = antiderivative(alpha * beta, 0)

    alpha_xy = embed(alpha, 2, _X_ONLY)
    beta_xy = embed(beta, 2, _X_ONLY)
    y = variable(2, 1)
    f = (alpha_xy - beta_xy ** 2 * y) ** 2 - embed(integral, 2, _X_ONLY)

    morse_scalar_logger.info(f"build_f: deg alpha={alpha.degree}, deg f={f.degree}, {len(f)} terms")
    return MorsePair(alpha=alpha, beta=beta, f=f)


def hessian_f(pair: MorsePair, point: Sequence) -> List[List[Fraction]]:
    """Exact Hessian of f at a rational point, from symbolic second partials."""
    if len(point) != 2:
        raise DimensionMismatchError("f lives in the plane", length=len(point))
    return [[eval_rational(entry, point) for entry in row] for row in hessian(pair.f)]


def closed_form_hessian(alpha: MultiPoly, root) -> List[List[Fraction]]:
    """[[3a'^2, -2a'^3], [-2a'^3, 2a'^4]] with a' = alpha'(root); only valid at a zero of alpha."""
    d = eval_rational(partial(alpha, 0), [root])
    return [[3 * d ** 2, -2 * d ** 3], [-2 * d ** 3, 2 * d ** 4]]


def general_second_partials(pair: MorsePair) -> Tuple[MultiPoly, MultiPoly, MultiPoly]:
    """f_xx, f_yy, f_xy written out in alpha and beta (valid everywhere, not just on the critical set)."""
    emb = lambda p: embed(p, 2, _X_ONLY)  # noqa: E731
    a, b = emb(pair.alpha), emb(pair.beta)
    da, db = emb(partial(pair.alpha, 0)), emb(partial(pair.beta, 0))
    dda, ddb = emb(partial(partial(pair.alpha, 0), 0)), emb(partial(partial(pair.beta, 0), 0))
    y = variable(2, 1)

    inner = a - b ** 2 * y
    inner_x = da - 2 * b * db * y
    f_xx = 2 * inner_x ** 2 + 2 * inner * (dda - 2 * (b * ddb + db ** 2) * y) - da * b - a * db
    f_yy = 2 * b ** 4
    f_xy = -2 * inner_x * b ** 2 - 4 * inner * b * db
    return f_xx, f_yy, f_xy


def fy_identity_holds(pair: MorsePair) -> bool:
    """f_y == -2 (alpha - beta^2 y) beta^2 as polynomials."""
    a = embed(pair.alpha, 2, _X_ONLY)
    b = embed(pair.beta, 2, _X_ONLY)
    y = variable(2, 1)
    return partial(pair.f, 1) == -2 * (a - b ** 2 * y) * b ** 2


def roots_of(pair: MorsePair, spec: Optional[AlphaSpec] = None) -> Tuple[Fraction, ...]:
    """Rational roots of alpha.

    Taken from spec when given. Otherwise numpy's companion-matrix roots are
    rationalised and kept only if alpha vanishes there exactly.
    """
    if spec is not None:
        return spec.roots
    coeffs = univariate_coefficients(pair.alpha)
    approx = np.roots([float(c) for c in reversed(coeffs)])
    found = set()
    for value in approx:
        if abs(value.imag) > _ROOT_IMAG_TOL:
            continue
        candidate = Fraction(float(value.real)).limit_denominator(_ROOT_MAX_DENOMINATOR)
        if eval_rational(pair.alpha, [candidate]) == 0:
            found.add(candidate)
    if len(found) < pair.alpha.degree:
        morse_scalar_logger.warning(
            f"roots_of: only {len(found)} of {pair.alpha.degree} roots recovered exactly; pass the AlphaSpec"
        )
    return tuple(sorted(found))


def certify_critical_set(
    pair: MorsePair,
    spec: Optional[AlphaSpec] = None,
    box: Optional[BoxSpec] = None,
    config: Optional[VerifyConfig] = None,
) -> CertReport:
    """Check every (a_i, 0) exactly and search the default box for anything else.

    Failures are recorded in the report, never raised.
    """
    config = config or VerifyConfig()
    points = [(root, Fraction(0)) for root in roots_of(pair, spec)]
    report = certify_polynomial(pair.f, points, box=box, config=config)
    morse_scalar_logger.info(
        f"certify_critical_set: {len(points)} points, overall_pass={report.overall_pass}"
    )
    return report


def hessian_determinants(pair: MorsePair, spec: AlphaSpec) -> List[Fraction]:
    return [determinant(hessian_f(pair, (a, 0))) for a in spec.roots]


def gradient_at(pair: MorsePair, point: Sequence) -> Tuple[Fraction, Fraction]:
    grad = gradient(pair.f)
    return tuple(eval_rational(c, point) for c in grad.components)
