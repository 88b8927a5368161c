# __file__: poly_core.py
#
# __brief__:
#     Exact sparse multivariate polynomials over the rationals.
#     A polynomial is a map exponent-vector -> Fraction with no zero entries;
#     every other module (alpha, f, Q, F, P, gamma, vector fields) is built on it.

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

import math
from fractions import Fraction
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.exceptions import (
    ArityMismatchError,
    DimensionMismatchError,
    MalformedInputError,
    NonFiniteInputError,
    VariableIndexError,
)
from utils.logger import setup_logger

# ==========
poly_core_logger = setup_logger(name="poly_core.py_logger", log_file="poly_core.log")
# ==========

poly_core_logger.info("poly_core_logger")

Rational = Fraction
Exponents = Tuple[int, ...]
Scalar = Union[int, Fraction]

# Rows evaluated per numpy chunk in eval_float_batch(), keeps (rows x terms) tables small
_EVAL_CHUNK: int = 4096


def to_rational(value) -> Fraction:
    """Promote an exact scalar to a Fraction.

    Args:
        value: int, Fraction, or a string such as "3/4" or "-2"

    Raises:
        MalformedInputError: for floats, bools and anything unparsable

    Returns:
        Fraction: the exact value
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise MalformedInputError("booleans are not rationals", value=value)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise MalformedInputError(
                "could not parse rational", value=value, function="to_rational"
            ) from e
    raise MalformedInputError(
        "only exact scalars (int, Fraction, str) are accepted",
        value=repr(value),
        function="to_rational",
    )


def graded_lex_key(exponents: Exponents) -> Tuple[int, Exponents]:
    """Sort key for graded lexicographic order (total degree first, then lex)."""
    return sum(exponents), exponents


def _fraction_to_float(value: Fraction) -> float:
    try:
        return float(value)
    except OverflowError:
        return math.copysign(math.inf, value)


class MultiPoly:
    """Immutable sparse polynomial in `dimension` variables with Fraction coefficients.

    The zero polynomial is the empty term map. Arithmetic operators accept
    other MultiPolys of the same dimension or exact scalars.
    """

    __slots__ = ("_dimension", "_terms", "_hash", "_compiled")

    def __init__(self, dimension: int, terms: Optional[Mapping[Sequence[int], Scalar]] = None):
        if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 1:
            raise DimensionMismatchError(
                "dimension must be a positive integer", dimension=dimension
            )

        clean: Dict[Exponents, Fraction] = {}
        for exps, coeff in (terms or {}).items():
            key = tuple(int(e) for e in exps)
            if len(key) != dimension:
                raise DimensionMismatchError(
                    "monomial length does not match dimension",
                    exponents=key,
                    dimension=dimension,
                )
            if any(e < 0 for e in key):
                raise MalformedInputError("negative exponent", exponents=key)
            c = clean.get(key, Fraction(0)) + to_rational(coeff)
            if c:
                clean[key] = c
            else:
                clean.pop(key, None)

        self._dimension = dimension
        self._terms = clean
        self._hash = None
        self._compiled = None

    @classmethod
    def _from_clean(cls, dimension: int, terms: Dict[Exponents, Fraction]) -> "MultiPoly":
        # Trusted constructor: keys validated, no zero coefficients
        obj = cls.__new__(cls)
        obj._dimension = dimension
        obj._terms = terms
        obj._hash = None
        obj._compiled = None
        return obj

    # ---------------------------------------------------------------- accessors
    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def terms(self) -> Mapping[Exponents, Fraction]:
        return MappingProxyType(self._terms)

    def ordered_terms(self) -> List[Tuple[Exponents, Fraction]]:
        """Terms in canonical graded-lex order, highest degree first."""
        return sorted(self._terms.items(), key=lambda t: graded_lex_key(t[0]), reverse=True)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self._dimension, Fraction(0))

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def degree_in(self, var: int) -> int:
        _check_var(self, var)
        if not self._terms:
            return -1
        return max(e[var] for e in self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    # ---------------------------------------------------------------- equality
    def __eq__(self, other) -> bool:
        if isinstance(other, MultiPoly):
            return self._dimension == other._dimension and self._terms == other._terms
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self._terms == _scalar_terms(self._dimension, Fraction(other))
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._dimension, frozenset(self._terms.items())))
        return self._hash

    # ---------------------------------------------------------------- arithmetic
    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return constant(self._dimension, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(self, other)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly._from_clean(self._dimension, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(self, -other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(other, -self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return scale(self, other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return mul(self, other)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "MultiPoly":
        if isinstance(exponent, bool) or not isinstance(exponent, int) or exponent < 0:
            raise MalformedInputError("exponent must be a non-negative integer", exponent=exponent)
        result = constant(self._dimension, 1)
        base = self
        while exponent:
            if exponent & 1:
                result = mul(result, base)
            exponent >>= 1
            if exponent:
                base = mul(base, base)
        return result

    # ---------------------------------------------------------------- display
    def to_text(self, names: Optional[Sequence[str]] = None) -> str:
        """Readable form, e.g. 'x1^2 - 1/2*x2 + 3'."""
        if not self._terms:
            return "0"
        names = list(names) if names else [f"x{i + 1}" for i in range(self._dimension)]
        pieces = []
        for exps, coeff in self.ordered_terms():
            factors = [
                names[i] if e == 1 else f"{names[i]}^{e}" for i, e in enumerate(exps) if e
            ]
            magnitude = abs(coeff)
            if not factors:
                body = str(magnitude)
            elif magnitude == 1:
                body = "*".join(factors)
            else:
                body = f"{magnitude}*" + "*".join(factors)
            sign = "-" if coeff < 0 else "+"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self) -> str:
        return f"MultiPoly(dim={self._dimension}, {self.to_text()})"

    # ---------------------------------------------------------------- float eval support
    def _float_tables(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._compiled is None:
            ordered = self.ordered_terms()
            if ordered:
                exps = np.array([e for e, _ in ordered], dtype=np.int64)
            else:
                exps = np.zeros((0, self._dimension), dtype=np.int64)
            coeffs = np.array([_fraction_to_float(c) for _, c in ordered], dtype=np.float64)
            self._compiled = (exps, coeffs)
        return self._compiled


class PolyMap:
    """A polynomial map R^domain_dim -> R^len(components)."""

    __slots__ = ("_domain_dim", "_components")

    def __init__(self, domain_dim: int, components: Iterable[MultiPoly]):
        components = tuple(components)
        for i, comp in enumerate(components):
            if not isinstance(comp, MultiPoly):
                raise MalformedInputError("PolyMap components must be MultiPoly", index=i)
            if comp.dimension != domain_dim:
                raise DimensionMismatchError(
                    "component dimension differs from domain dimension",
                    index=i,
                    component_dim=comp.dimension,
                    domain_dim=domain_dim,
                )
        self._domain_dim = domain_dim
        self._components = components

    @classmethod
    def identity(cls, n: int) -> "PolyMap":
        return cls(n, (variable(n, i) for i in range(n)))

    @property
    def domain_dim(self) -> int:
        return self._domain_dim

    @property
    def codomain_dim(self) -> int:
        return len(self._components)

    @property
    def components(self) -> Tuple[MultiPoly, ...]:
        return self._components

    def __len__(self) -> int:
        return len(self._components)

    def __getitem__(self, index: int) -> MultiPoly:
        return self._components[index]

    def __iter__(self):
        return iter(self._components)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyMap):
            return NotImplemented
        return self._domain_dim == other._domain_dim and self._components == other._components

    def __hash__(self) -> int:
        return hash((self._domain_dim, self._components))

    def __neg__(self) -> "PolyMap":
        return PolyMap(self._domain_dim, (-c for c in self._components))

    def is_identity(self) -> bool:
        return self == PolyMap.identity(self._domain_dim)

    @property
    def degree(self) -> int:
        return max((c.degree for c in self._components), default=-1)

    def jacobian(self) -> Tuple[Tuple[MultiPoly, ...], ...]:
        """Matrix of partials, row i = gradient of component i."""
        return tuple(
            tuple(partial(comp, j) for j in range(self._domain_dim)) for comp in self._components
        )

    def __repr__(self) -> str:
        inner = ", ".join(c.to_text() for c in self._components)
        return f"PolyMap({self._domain_dim} -> {self.codomain_dim}: [{inner}])"


# ==================================================================== builders
def _scalar_terms(dimension: int, value: Fraction) -> Dict[Exponents, Fraction]:
    return {(0,) * dimension: value} if value else {}


def constant(dimension: int, value: Scalar) -> MultiPoly:
    return MultiPoly(dimension, {(0,) * dimension: to_rational(value)})


def zero(dimension: int) -> MultiPoly:
    return MultiPoly(dimension)


def variable(dimension: int, index: int) -> MultiPoly:
    if not 0 <= index < dimension:
        raise VariableIndexError("variable index out of range", index=index, dimension=dimension)
    exps = [0] * dimension
    exps[index] = 1
    return MultiPoly._from_clean(dimension, {tuple(exps): Fraction(1)})


def univariate(coefficients: Sequence[Scalar]) -> MultiPoly:
    """Build a dimension-1 polynomial from coefficients, constant term first."""
    return MultiPoly(1, {(i,): c for i, c in enumerate(coefficients)})


def univariate_coefficients(p: MultiPoly) -> List[Fraction]:
    """Dense coefficient list (constant term first) of a dimension-1 polynomial."""
    if p.dimension != 1:
        raise DimensionMismatchError("expected a univariate polynomial", dimension=p.dimension)
    coeffs = [Fraction(0)] * (p.degree + 1)
    for (e,), c in p.terms.items():
        coeffs[e] = c
    return coeffs


def embed(p: MultiPoly, dimension: int, placement: Sequence[int]) -> MultiPoly:
    """Lift p into `dimension` variables, sending its variable i to variable placement[i]."""
    if len(placement) != p.dimension:
        raise ArityMismatchError(
            "placement needs one target per variable", placement=list(placement), dimension=p.dimension
        )
    for target in placement:
        if not 0 <= target < dimension:
            raise VariableIndexError("placement target out of range", target=target, dimension=dimension)
    terms: Dict[Exponents, Fraction] = {}
    for exps, coeff in p.terms.items():
        lifted = [0] * dimension
        for source, target in enumerate(placement):
            lifted[target] += exps[source]
        key = tuple(lifted)
        terms[key] = terms.get(key, Fraction(0)) + coeff
    return MultiPoly(dimension, terms)


# ==================================================================== arithmetic
def _check_same_dimension(a: MultiPoly, b: MultiPoly, function: str) -> None:
    if a.dimension != b.dimension:
        raise DimensionMismatchError(
            "operands live in different dimensions",
            left=a.dimension,
            right=b.dimension,
            function=function,
        )


def _check_var(p: MultiPoly, var: int) -> None:
    if isinstance(var, bool) or not isinstance(var, int) or not 0 <= var < p.dimension:
        raise VariableIndexError("variable index out of range", index=var, dimension=p.dimension)


def add(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    """Pointwise coefficient sum with zero coefficients purged."""
    _check_same_dimension(a, b, "add()")
    terms = dict(a._terms)
    for exps, coeff in b._terms.items():
        c = terms.get(exps)
        if c is None:
            terms[exps] = coeff
        else:
            c += coeff
            if c:
                terms[exps] = c
            else:
                del terms[exps]
    return MultiPoly._from_clean(a.dimension, terms)


def scale(p: MultiPoly, factor: Scalar) -> MultiPoly:
    factor = to_rational(factor)
    if not factor:
        return zero(p.dimension)
    return MultiPoly._from_clean(p.dimension, {e: c * factor for e, c in p._terms.items()})


def mul(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    """Distributive product with exact coefficients."""
    _check_same_dimension(a, b, "mul()")
    terms: Dict[Exponents, Fraction] = {}
    for e1, c1 in a._terms.items():
        for e2, c2 in b._terms.items():
            key = tuple(x + y for x, y in zip(e1, e2))
            terms[key] = terms.get(key, 0) + c1 * c2
    return MultiPoly._from_clean(a.dimension, {e: c for e, c in terms.items() if c})


def partial(p: MultiPoly, var: int) -> MultiPoly:
    """Exact partial derivative with respect to variable `var`."""
    _check_var(p, var)
    terms: Dict[Exponents, Fraction] = {}
    for exps, coeff in p._terms.items():
        e = exps[var]
        if e:
            key = exps[:var] + (e - 1,) + exps[var + 1:]
            terms[key] = coeff * e
    return MultiPoly._from_clean(p.dimension, terms)


def antiderivative(p: MultiPoly, var: int) -> MultiPoly:
    """Anti-derivative in `var` with zero integration constant."""
    _check_var(p, var)
    terms: Dict[Exponents, Fraction] = {}
    for exps, coeff in p._terms.items():
        e = exps[var] + 1
        key = exps[:var] + (e,) + exps[var + 1:]
        terms[key] = coeff / e
    return MultiPoly._from_clean(p.dimension, terms)


def gradient(p: MultiPoly) -> PolyMap:
    return PolyMap(p.dimension, (partial(p, i) for i in range(p.dimension)))


def hessian(p: MultiPoly) -> Tuple[Tuple[MultiPoly, ...], ...]:
    return gradient(p).jacobian()


# ==================================================================== composition
class _Substitution:
    """Caches powers of the substituted components so several polynomials can share them."""

    def __init__(self, m: PolyMap):
        self._map = m
        self._powers: List[List[MultiPoly]] = [[constant(m.domain_dim, 1)] for _ in m.components]

    def power(self, var: int, exponent: int) -> MultiPoly:
        cache = self._powers[var]
        while len(cache) <= exponent:
            cache.append(mul(cache[-1], self._map.components[var]))
        return cache[exponent]

    def apply(self, p: MultiPoly) -> MultiPoly:
        dim = self._map.domain_dim
        acc: Dict[Exponents, Fraction] = {}
        for exps, coeff in p.ordered_terms():
            product: Optional[MultiPoly] = None
            for var, e in enumerate(exps):
                if not e:
                    continue
                factor = self.power(var, e)
                product = factor if product is None else mul(product, factor)
            if product is None:
                key = (0,) * dim
                acc[key] = acc.get(key, 0) + coeff
                continue
            for key, c in product._terms.items():
                acc[key] = acc.get(key, 0) + coeff * c
        return MultiPoly._from_clean(dim, {e: c for e, c in acc.items() if c})


def compose(p: MultiPoly, m: PolyMap) -> MultiPoly:
    """Substitute component i of m for variable i of p."""
    if len(m.components) != p.dimension:
        raise ArityMismatchError(
            "map arity does not match polynomial dimension",
            components=len(m.components),
            dimension=p.dimension,
            function="compose()",
        )
    result = _Substitution(m).apply(p)
    poly_core_logger.debug(
        f"compose: deg {p.degree} with map deg {m.degree} -> deg {result.degree}, {len(result)} terms"
    )
    return result


def compose_map(a: PolyMap, b: PolyMap) -> PolyMap:
    """The map a∘b (apply b first)."""
    if len(b.components) != a.domain_dim:
        raise ArityMismatchError(
            "inner map codomain does not match outer map domain",
            inner_codomain=len(b.components),
            outer_domain=a.domain_dim,
            function="compose_map()",
        )
    substitution = _Substitution(b)
    result = PolyMap(b.domain_dim, (substitution.apply(c) for c in a.components))
    poly_core_logger.debug(f"compose_map: {a.domain_dim}->{a.codomain_dim} after {b.domain_dim}->{b.codomain_dim}")
    return result


# ==================================================================== evaluation
def eval_rational(p: MultiPoly, x: Sequence[Scalar]) -> Fraction:
    """Exact value of p at a rational point."""
    if len(x) != p.dimension:
        raise DimensionMismatchError("point length does not match dimension", length=len(x), dimension=p.dimension)
    point = [to_rational(v) for v in x]
    total = Fraction(0)
    for exps, coeff in p._terms.items():
        term = coeff
        for v, e in zip(point, exps):
            if e:
                term *= v ** e
        total += term
    return total


def eval_map_rational(m: PolyMap, x: Sequence[Scalar]) -> Tuple[Fraction, ...]:
    return tuple(eval_rational(c, x) for c in m.components)


def eval_float_batch(p: MultiPoly, points, check_finite: bool = True) -> np.ndarray:
    """Evaluate p on every row of `points` (shape (N, dimension)).

    Terms are summed in canonical order with numpy's pairwise summation, so the
    result does not depend on dict iteration order.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[1] != p.dimension:
        raise DimensionMismatchError(
            "point length does not match dimension", length=pts.shape[1], dimension=p.dimension
        )
    if check_finite and not np.all(np.isfinite(pts)):
        raise NonFiniteInputError("non-finite coordinate", function="eval_float_batch()")

    exps, coeffs = p._float_tables()
    out = np.zeros(pts.shape[0], dtype=np.float64)
    if coeffs.size == 0:
        return out

    max_deg = exps.max(axis=0)
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, pts.shape[0], _EVAL_CHUNK):
            chunk = pts[start:start + _EVAL_CHUNK]
            monomials = np.ones((chunk.shape[0], coeffs.size), dtype=np.float64)
            for var in range(p.dimension):
                if max_deg[var] == 0:
                    continue
                table = chunk[:, var:var + 1] ** np.arange(max_deg[var] + 1)
                monomials *= table[:, exps[:, var]]
            out[start:start + chunk.shape[0]] = np.sum(monomials * coeffs, axis=1)
    return out


def eval_float(p: MultiPoly, x: Sequence[float]) -> float:
    """Double-precision value of p at x.

    Raises:
        DimensionMismatchError: wrong point length
        NonFiniteInputError: NaN or inf coordinate
    """
    if len(x) != p.dimension:
        raise DimensionMismatchError("point length does not match dimension", length=len(x), dimension=p.dimension)
    if not all(math.isfinite(float(v)) for v in x):
        raise NonFiniteInputError("non-finite coordinate", point=list(x), function="eval_float()")
    return float(eval_float_batch(p, [list(map(float, x))], check_finite=False)[0])


class MapEvaluator:
    """Float evaluator for all components of a PolyMap at once.

    The components share one table of monomials (union of their exponent
    vectors, canonical order); each output column is a pairwise sum over it.
    Used by the batched Newton and RK4 loops, where per-component calls
    would rebuild the same power tables several times per step.
    """

    def __init__(self, m: PolyMap):
        self._dimension = m.domain_dim
        self._width = m.codomain_dim
        union = sorted(
            {e for comp in m.components for e in comp.terms},
            key=graded_lex_key,
            reverse=True,
        )
        index = {e: i for i, e in enumerate(union)}
        self._exps = (
            np.array(union, dtype=np.int64) if union else np.zeros((0, m.domain_dim), dtype=np.int64)
        )
        self._coeffs = np.zeros((len(union), self._width), dtype=np.float64)
        for j, comp in enumerate(m.components):
            for e, c in comp.terms.items():
                self._coeffs[index[e], j] = _fraction_to_float(c)
        self._max_deg = self._exps.max(axis=0) if union else np.zeros(m.domain_dim, dtype=np.int64)

    @property
    def width(self) -> int:
        return self._width

    def __call__(self, points) -> np.ndarray:
        return self._evaluate(np.asarray(points, dtype=np.float64), self._coeffs)

    def magnitude(self, points) -> np.ndarray:
        """Per component sum of |term|, the scale of the rounding error in __call__."""
        return self._evaluate(np.abs(np.asarray(points, dtype=np.float64)), np.abs(self._coeffs))

    def _evaluate(self, pts: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.shape[1] != self._dimension:
            raise DimensionMismatchError(
                "point length does not match dimension", length=pts.shape[1], dimension=self._dimension
            )
        if self._exps.shape[0] == 0:
            return np.zeros((pts.shape[0], self._width))
        with np.errstate(over="ignore", invalid="ignore"):
            monomials = np.ones((pts.shape[0], self._exps.shape[0]), dtype=np.float64)
            for var in range(self._dimension):
                if self._max_deg[var] == 0:
                    continue
                table = pts[:, var:var + 1] ** np.arange(self._max_deg[var] + 1)
                monomials *= table[:, self._exps[:, var]]
            out = np.empty((pts.shape[0], self._width), dtype=np.float64)
            for j in range(self._width):
                out[:, j] = np.sum(monomials * coeffs[:, j], axis=1)
        return out
