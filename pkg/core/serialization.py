# __file__: serialization.py
#
# __brief__:
#     JSON codecs for every artifact the CLI reads or writes. Rationals travel as
#     decimal strings so no integer width is ever assumed; polynomials are printed
#     in canonical graded-lex order, so parse(print(p)) == p and print(parse(doc)) == doc.

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from core.constants import BUNDLE_FORMAT, FIELD_FORMAT, REPORT_FORMAT, TRACE_FORMAT
from core.coord_change import PointSet
from core.poly_core import MultiPoly, PolyMap
from core.synth import (
    SaddleCensus,
    SaddleField,
    SynthesisResult,
    degree_audit,
    hessian_at,
    point_minors,
)
from core.verify import BasinSample, CertReport, FlowTrace
from utils.exceptions import MalformedInputError
from utils.logger import setup_logger

# ==========
serialization_logger = setup_logger(
    name="serialization.py_logger", log_file="serialization.log"
)
# ==========

serialization_logger.info("serialization_logger")


# ==================================================================== scalars
def rational_to_str(value: Fraction) -> str:
    return str(Fraction(value))


def rational_from_str(text: Any, where: str = "rational") -> Fraction:
    """Parse "p/q" or "p"; JSON integers are accepted, floats are not (inputs must be exact)."""
    if isinstance(text, bool):
        raise MalformedInputError("expected a rational, got a boolean", where=where)
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise MalformedInputError("expected a rational string such as \"3/4\"", where=where, value=repr(text))
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise MalformedInputError("could not parse rational", where=where, value=text) from e


def _int_from_str(text: Any, where: str) -> int:
    if isinstance(text, bool) or not isinstance(text, str):
        raise MalformedInputError("expected a decimal integer string", where=where, value=repr(text))
    try:
        return int(text.strip(), 10)
    except ValueError as e:
        raise MalformedInputError("could not parse integer", where=where, value=text) from e


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def _require(doc: Any, key: str, kind, where: str):
    if not isinstance(doc, dict):
        raise MalformedInputError("expected a JSON object", where=where)
    if key not in doc:
        raise MalformedInputError("missing key", key=key, where=where)
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise MalformedInputError("unexpected JSON type", key=key, where=where)
    return value


# ==================================================================== polynomials
def poly_to_json(p: MultiPoly) -> Dict[str, Any]:
    return {
        "dimension": p.dimension,
        "terms": [
            {"exponents": list(exps), "num": str(c.numerator), "den": str(c.denominator)}
            for exps, c in p.ordered_terms()
        ],
    }


def poly_from_json(doc: Any, where: str = "polynomial") -> MultiPoly:
    """Inverse of poly_to_json.

    Raises:
        MalformedInputError: wrong shape, bad integers, zero denominator or repeated monomial
    """
    dimension = _require(doc, "dimension", int, where)
    terms = _require(doc, "terms", list, where)
    if dimension < 1:
        raise MalformedInputError("dimension must be positive", where=where, dimension=dimension)
    parsed: Dict[Tuple[int, ...], Fraction] = {}
    for i, term in enumerate(terms):
        at = f"{where}.terms[{i}]"
        exps = _require(term, "exponents", list, at)
        if len(exps) != dimension or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in exps):
            raise MalformedInputError("exponents must be non-negative integers, one per variable", where=at)
        num = _int_from_str(_require(term, "num", str, at), at)
        den = _int_from_str(_require(term, "den", str, at), at)
        if den == 0:
            raise MalformedInputError("zero denominator", where=at)
        key = tuple(exps)
        if key in parsed:
            raise MalformedInputError("monomial listed twice", where=at, exponents=key)
        parsed[key] = Fraction(num, den)
    return MultiPoly(dimension, parsed)


def polymap_to_json(m: PolyMap) -> Dict[str, Any]:
    return {"domain_dim": m.domain_dim, "components": [poly_to_json(c) for c in m.components]}


def polymap_from_json(doc: Any, where: str = "map") -> PolyMap:
    domain_dim = _require(doc, "domain_dim", int, where)
    components = _require(doc, "components", list, where)
    polys = [poly_from_json(c, f"{where}.components[{i}]") for i, c in enumerate(components)]
    if any(p.dimension != domain_dim for p in polys):
        raise MalformedInputError("component dimension differs from domain_dim", where=where)
    return PolyMap(domain_dim, polys)


# ==================================================================== point sets
def pointset_to_json(xs: PointSet) -> Dict[str, Any]:
    return {
        "dimension": xs.dimension,
        "points": [[rational_to_str(v) for v in point] for point in xs.points],
    }


def pointset_from_json(doc: Any) -> PointSet:
    """Parse the point-set input.

    Raises:
        MalformedInputError: not the documented shape, or a coordinate is not rational
        HypothesisViolationError: n < 2, empty set, ragged or duplicate points
    """
    dimension = _require(doc, "dimension", int, "point set")
    raw = _require(doc, "points", list, "point set")
    points = []
    for i, point in enumerate(raw):
        if not isinstance(point, list):
            raise MalformedInputError("each point must be a JSON array", index=i)
        points.append(tuple(rational_from_str(v, f"points[{i}]") for v in point))
    return PointSet(dimension, tuple(points))


def _rational_list(values, where: str) -> List[Fraction]:
    if not isinstance(values, list):
        raise MalformedInputError("expected a JSON array", where=where)
    return [rational_from_str(v, where) for v in values]


def _matrix_to_json(matrix) -> List[List[str]]:
    return [[rational_to_str(v) for v in row] for row in matrix]


# ==================================================================== bundles
@dataclass(frozen=True)
class AuditBundle:
    """What a bundle file carries; enough to re-verify without re-synthesizing."""

    input: PointSet
    forward: PolyMap
    inverse: PolyMap
    p_poly: MultiPoly
    neg_grad: PolyMap
    hessians: Tuple[Tuple[Tuple[Fraction, ...], ...], ...]
    minors: Tuple[Tuple[Fraction, ...], ...]
    raw: Dict[str, Any]


def bundle_to_json(result: SynthesisResult) -> Dict[str, Any]:
    change = result.change
    audit = degree_audit(result)
    return {
        "format": BUNDLE_FORMAT,
        "input": pointset_to_json(result.input),
        "direction": [rational_to_str(v) for v in change.direction],
        "linear_part": _matrix_to_json(change.linear_part),
        "interpolants": [poly_to_json(p) for p in change.interpolants],
        "axis_images": [rational_to_str(v) for v in change.axis_images],
        "alpha_roots": [rational_to_str(v) for v in result.alpha_spec.roots],
        "alpha": poly_to_json(result.morse.alpha),
        "f": poly_to_json(result.morse.f),
        "q": poly_to_json(result.q),
        "forward": polymap_to_json(change.forward),
        "inverse": polymap_to_json(change.inverse),
        "p": poly_to_json(result.p_poly),
        "neg_grad": polymap_to_json(result.grad_field),
        "hessians": [_matrix_to_json(hessian_at(result, x)) for x in result.input.points],
        "minors": [[rational_to_str(m) for m in row] for row in point_minors(result)],
        "degree_audit": {
            "deg_f": audit.deg_f,
            "max_deg_forward": audit.max_deg_forward,
            "deg_p": audit.deg_p,
            "bound": audit.bound,
        },
    }


def bundle_from_json(doc: Any) -> AuditBundle:
    if _require(doc, "format", str, "bundle") != BUNDLE_FORMAT:
        raise MalformedInputError("unknown bundle format", found=doc.get("format"), expected=BUNDLE_FORMAT)
    xs = pointset_from_json(_require(doc, "input", dict, "bundle"))
    hessians = _require(doc, "hessians", list, "bundle")
    minors = _require(doc, "minors", list, "bundle")
    if len(hessians) != xs.k or len(minors) != xs.k:
        raise MalformedInputError("one Hessian and one minor list per point expected", points=xs.k)
    bundle = AuditBundle(
        input=xs,
        forward=polymap_from_json(_require(doc, "forward", dict, "bundle"), "forward"),
        inverse=polymap_from_json(_require(doc, "inverse", dict, "bundle"), "inverse"),
        p_poly=poly_from_json(_require(doc, "p", dict, "bundle"), "p"),
        neg_grad=polymap_from_json(_require(doc, "neg_grad", dict, "bundle"), "neg_grad"),
        hessians=tuple(
            tuple(tuple(_rational_list(row, f"hessians[{i}]")) for row in matrix)
            for i, matrix in enumerate(hessians)
        ),
        minors=tuple(tuple(_rational_list(row, f"minors[{i}]")) for i, row in enumerate(minors)),
        raw=doc,
    )
    n = xs.dimension
    for name, m in (("forward", bundle.forward), ("inverse", bundle.inverse), ("neg_grad", bundle.neg_grad)):
        if m.domain_dim != n or m.codomain_dim != n:
            raise MalformedInputError("map does not act on the input's dimension", map=name, dimension=n)
    if bundle.p_poly.dimension != n:
        raise MalformedInputError("P does not live in the input's dimension", dimension=n)
    return bundle


# ==================================================================== reports
def report_to_json(report: CertReport) -> Dict[str, Any]:
    search = report.spurious_search
    return {
        "format": REPORT_FORMAT,
        "overall_pass": report.overall_pass,
        "per_point": [
            {
                "point": [rational_to_str(v) for v in cert.point],
                "gradient": [rational_to_str(v) for v in cert.gradient],
                "gradient_residual": cert.gradient_is_zero,
                "minors": [rational_to_str(m) for m in cert.minors],
                "stored_minors_match": cert.stored_minors_match,
                "pass": cert.passed,
            }
            for cert in report.per_point
        ],
        "spurious_search": {
            "seeds_used": search.seeds_used,
            "converged_points": search.converged_points,
            "all_within_tol_of_X": search.all_within_tol_of_X,
            "singular_seeds": search.singular_seeds,
            "unconverged_seeds": search.unconverged_seeds,
            "box": {
                "lower": list(search.box.lower),
                "upper": list(search.box.upper),
                "derivation": search.box.derivation,
            },
        },
        "consistency": dict(report.consistency),
        "config": report.config.to_dict() if report.config is not None else None,
        "failures": report.failures(),
    }


# ==================================================================== basin
def basin_to_json(sample: BasinSample) -> Dict[str, Any]:
    return {
        "seed": sample.seed,
        "seeds_used": sample.seeds_used,
        "fraction": sample.fraction,
        "counts": dict(sample.counts),
        "per_target": list(sample.per_target),
        "lyapunov_rises": sample.lyapunov_rises,
        "pass": sample.passed,
    }


# ==================================================================== traces
def trace_to_json(trace: FlowTrace) -> Dict[str, Any]:
    return {
        "format": TRACE_FORMAT,
        "start": [_finite_or_none(v) for v in trace.start],
        "steps": trace.steps,
        "time": trace.time,
        "dt": trace.dt,
        "halved": trace.halved,
        "halvings": trace.halvings,
        "end": [_finite_or_none(v) for v in trace.end],
        "classified": {"kind": trace.classified, "index": trace.target_index},
        "final_grad_norm": _finite_or_none(trace.final_grad_norm),
        "note": trace.note,
        "sample_steps": list(trace.sample_steps),
        "samples": [[_finite_or_none(v) for v in s] for s in trace.samples],
        "potential_values": [_finite_or_none(v) for v in trace.potential_values],
    }


# ==================================================================== saddle fields
def saddle_field_to_json(sf: SaddleField, census: Optional[SaddleCensus] = None) -> Dict[str, Any]:
    doc = {
        "format": FIELD_FORMAT,
        "gamma": poly_to_json(sf.gamma),
        "stable_set": [rational_to_str(v) for v in sf.stable_set],
        "saddle_set": [rational_to_str(v) for v in sf.saddle_set],
        "field": polymap_to_json(sf.field),
        "forward": polymap_to_json(sf.change.forward),
        "inverse": polymap_to_json(sf.change.inverse),
        "pulled_back": polymap_to_json(sf.pulled_back),
        "stable_points_original": [[rational_to_str(v) for v in x] for x in sf.stable_points_original()],
        "saddle_points_original": [[rational_to_str(v) for v in x] for x in sf.saddle_points_original()],
    }
    if census is not None:
        doc["census"] = {
            "gamma_roots_exact": census.gamma_roots_exact,
            "slopes_ok": census.slopes_ok,
            "tail_is_contracting": census.tail_is_contracting,
            "stable_patterns": [list(p) for p in census.stable_patterns],
            "saddle_patterns": [list(p) for p in census.saddle_patterns],
            "pulled_back_vanishes": census.pulled_back_vanishes,
            "passed": census.passed,
        }
    return doc
