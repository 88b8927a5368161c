# __file__: terminal_ui.py
#
# __brief__: Command line front end for morseforge
#
#     synthesize   -i points.json -o bundle.json
#     verify       -i bundle.json -o report.json [--box lo,hi ...] [--seeds-per-axis N] [--basin-seeds N]
#     flow         -i bundle.json --start "x,y,..." [--dt D] [--t-max T] [--field {gradient,saddle}]
#     saddle-field -i points.json -o field.json
#     export-grid  -i bundle.json --resolution R -o grid.csv
#
#     Exit codes: 0 pass, 1 verification/convergence failure, 2 parse error,
#     3 hypothesis violation, 4 unsupported operation.

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

import argparse
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table
from rich.text import Text

from core.constants import (
    DEFAULT_SEED,
    EXIT_PASS,
    GRID_DEFAULT_RESOLUTION,
    GRID_MIN_RESOLUTION,
    SEED_ENV_VAR,
)
from core.coord_change import PointSet
from core.poly_core import (
    compose_map,
    eval_float_batch,
    eval_map_rational,
    eval_rational,
    gradient,
    hessian,
)
from core.serialization import (
    AuditBundle,
    basin_to_json,
    bundle_from_json,
    bundle_to_json,
    pointset_from_json,
    report_to_json,
    saddle_field_to_json,
    trace_to_json,
)
from core.synth import build_saddle_field, saddle_census, synthesize
from core.verify import (
    BoxSpec,
    VerifyConfig,
    basin_raster,
    basin_sample,
    certify_polynomial,
    integrate_flow,
    lyapunov_violations,
)
from utils.exceptions import (
    CustomExceptionSuper,
    MalformedInputError,
    UnsupportedOperationError,
    VerificationFailedError,
)
from utils.logger import enable_console_logging, setup_logger
from utils.utility import _generate_readable_report, _read_json, _save_to_csv, _save_to_json

# ==========
terminal_ui_logger = setup_logger(name="terminal_ui.py_logger", log_file="terminal_ui.log")
# ==========

terminal_ui_logger.info("terminal_ui_logger")

COMMANDS = ("synthesize", "verify", "flow", "saddle-field", "export-grid")
FIELDS = ("gradient", "saddle")

# argparse dest -> VerifyConfig field
_OVERRIDE_FLAGS = {
    "seeds_per_axis": "seeds_per_axis",
    "residual_tol": "residual_tol",
    "dedup_tol": "dedup_tol",
    "max_iter": "max_iter",
    "dt": "dt",
    "t_max": "t_max",
    "grad_tol": "grad_tol",
    "point_tol": "point_tol",
    "basin_seeds": "basin_seeds",
}


# ==================================================================== parsing helpers
def parse_vector(text: str, flag: str = "--start") -> Tuple[float, ...]:
    """'0.1,1/2,-3' -> (0.1, 0.5, -3.0)."""
    try:
        values = tuple(float(Fraction(part.strip())) for part in text.split(","))
    except (ValueError, ZeroDivisionError) as e:
        raise MalformedInputError("could not parse vector", flag=flag, value=text) from e
    if not all(np.isfinite(values)):
        raise MalformedInputError("vector entries must be finite", flag=flag, value=text)
    return values


def parse_box(pairs: Optional[Sequence[str]], dimension: int) -> Optional[BoxSpec]:
    """One 'lo,hi' per axis, or a single pair applied to every axis."""
    if not pairs:
        return None
    bounds = [parse_vector(pair, "--box") for pair in pairs]
    if any(len(b) != 2 for b in bounds):
        raise MalformedInputError("each --box needs exactly 'lo,hi'", value=list(pairs))
    if len(bounds) == 1:
        bounds = bounds * dimension
    if len(bounds) != dimension:
        raise MalformedInputError("one --box per axis expected", given=len(bounds), dimension=dimension)
    return BoxSpec(
        tuple(lo for lo, _ in bounds),
        tuple(hi for _, hi in bounds),
        "given on the command line",
    )


def resolve_seed(flag_value: Optional[int], environ: Mapping[str, str]) -> int:
    if flag_value is not None:
        return flag_value
    raw = environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    try:
        return int(raw.strip())
    except ValueError as e:
        raise MalformedInputError("seed environment variable is not an integer", variable=SEED_ENV_VAR, value=raw) from e


# ==================================================================== config
@dataclass(frozen=True)
class CliConfig:
    command: str
    input_path: str
    output_path: Optional[str]
    verify: VerifyConfig
    box_pairs: Tuple[str, ...] = ()
    start: Optional[Tuple[float, ...]] = None
    resolution: int = GRID_DEFAULT_RESOLUTION
    field: str = "gradient"
    run_basin: bool = False
    verbose: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace, environ: Optional[Mapping[str, str]] = None) -> "CliConfig":
        """Validated config; every override goes through VerifyConfig.with_overrides()."""
        environ = os.environ if environ is None else environ
        overrides = {
            key: getattr(args, dest, None) for dest, key in _OVERRIDE_FLAGS.items()
        }
        overrides["seed"] = resolve_seed(getattr(args, "seed", None), environ)
        verify = VerifyConfig().with_overrides(**overrides)
        start = getattr(args, "start", None)
        return cls(
            command=args.command,
            input_path=args.input,
            output_path=getattr(args, "output", None),
            verify=verify,
            box_pairs=tuple(getattr(args, "box", None) or ()),
            start=parse_vector(start) if start is not None else None,
            resolution=getattr(args, "resolution", None) or GRID_DEFAULT_RESOLUTION,
            field=getattr(args, "field", None) or "gradient",
            run_basin=getattr(args, "basin_seeds", None) is not None,
            verbose=bool(getattr(args, "verbose", False)),
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morseforge",
        description="Exact polynomials with prescribed minima, and their gradient flows",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log to the console")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output_help):
        p.add_argument("-i", "--input", required=True, metavar="FILE", help="Input JSON file")
        p.add_argument("-o", "--output", metavar="FILE", help=output_help)
        p.add_argument("--seed", type=int, help=f"RNG seed (default: ${SEED_ENV_VAR} or {DEFAULT_SEED})")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="Log to the console")

    common(sub.add_parser("synthesize", help="Build P from a point set"), "Bundle JSON")

    verify = sub.add_parser("verify", help="Re-check a bundle")
    common(verify, "Report JSON")
    verify.add_argument("--box", action="append", metavar="LO,HI", help="Search bounds, one per axis")
    verify.add_argument("--seeds-per-axis", dest="seeds_per_axis", type=int)
    verify.add_argument("--residual-tol", dest="residual_tol", type=float)
    verify.add_argument("--dedup-tol", dest="dedup_tol", type=float)
    verify.add_argument("--max-iter", dest="max_iter", type=int)
    verify.add_argument("--dt", type=float)
    verify.add_argument("--t-max", dest="t_max", type=float)
    verify.add_argument(
        "--basin-seeds", dest="basin_seeds", type=int, metavar="N",
        help="Also flow N random seeds down -grad P and report the share reaching X",
    )

    flow = sub.add_parser("flow", help="Integrate a flow from one start point")
    common(flow, "Trace JSON")
    flow.add_argument("--start", required=True, metavar="X,Y,...")
    flow.add_argument("--dt", type=float)
    flow.add_argument("--t-max", dest="t_max", type=float)
    flow.add_argument("--grad-tol", dest="grad_tol", type=float)
    flow.add_argument("--point-tol", dest="point_tol", type=float)
    flow.add_argument("--box", action="append", metavar="LO,HI")
    flow.add_argument("--field", choices=FIELDS, default="gradient")

    common(sub.add_parser("saddle-field", help="Field with saddles between the points"), "Field JSON")

    grid = sub.add_parser("export-grid", help="CSV raster of P and basin labels (n = 2)")
    common(grid, "CSV file")
    grid.add_argument("--resolution", type=int, default=GRID_DEFAULT_RESOLUTION)
    grid.add_argument("--box", action="append", metavar="LO,HI")
    grid.add_argument("--dt", type=float)
    grid.add_argument("--t-max", dest="t_max", type=float)
    return parser


# ==================================================================== UI
class TerminalUI:
    """Runs one command and turns its outcome into an exit code."""

    def __init__(self, console: Optional[Console] = None, environ: Optional[Mapping[str, str]] = None):
        self.console = console or Console()
        self.environ = os.environ if environ is None else environ

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            # argparse exits 2 on bad flags and 0 on --help
            return int(e.code or 0)

        try:
            config = CliConfig.from_args(args, self.environ)
            if config.verbose:
                enable_console_logging()
            terminal_ui_logger.info(f"run: {config.command} -i {config.input_path}")
            handler = {
                "synthesize": self.cmd_synthesize,
                "verify": self.cmd_verify,
                "flow": self.cmd_flow,
                "saddle-field": self.cmd_saddle_field,
                "export-grid": self.cmd_export_grid,
            }[config.command]
            code = handler(config)
        except CustomExceptionSuper as e:
            terminal_ui_logger.error(repr(e))
            self.console.print(Text.from_ansi(e.what()))
            return e.exit_code

        terminal_ui_logger.info(f"run: {config.command} finished with exit code {code}")
        return code

    # ---------------------------------------------------------------- helpers
    def _load_points(self, path: str) -> PointSet:
        return pointset_from_json(_read_json(path))

    def _load_bundle(self, path: str) -> AuditBundle:
        return bundle_from_json(_read_json(path))

    def _box(self, config: CliConfig, points: Sequence[Sequence]) -> BoxSpec:
        box = parse_box(config.box_pairs, len(points[0]))
        return box or BoxSpec.from_points(points)

    def _verdict(self, ok: bool, what: str) -> None:
        style = "bold green" if ok else "bold red"
        self.console.print(f"[{style}]{what}: {'PASS' if ok else 'FAIL'}[/{style}]")

    # ---------------------------------------------------------------- commands
    def cmd_synthesize(self, config: CliConfig) -> int:
        """Point set -> audit bundle.

        Returns:
            int: EXIT_PASS (errors propagate as exceptions carrying their exit code)
        """
        xs = self._load_points(config.input_path)
        result = synthesize(xs)
        doc = bundle_to_json(result)
        path = _save_to_json(doc, config.output_path, source=config.input_path, kind="bundle")

        table = Table(title="Synthesis")
        table.add_column("n")
        table.add_column("k")
        table.add_column("deg F")
        table.add_column("deg P")
        table.add_column("terms of P")
        table.add_row(
            str(xs.dimension), str(xs.k), str(result.change.forward.degree),
            str(result.p_poly.degree), str(len(result.p_poly)),
        )
        self.console.print(table)
        self.console.print(f"Bundle written to [bold]{path}[/bold]")
        return EXIT_PASS

    def _consistency(self, bundle: AuditBundle) -> Dict[str, bool]:
        """Recompute what the bundle claims instead of trusting it."""
        xs = bundle.input
        images = [eval_map_rational(bundle.forward, x) for x in xs.points]
        firsts = [z[0] for z in images]
        recomputed_hessians = [
            tuple(tuple(row) for row in h) for h in _exact_hessians(bundle)
        ]
        return {
            "forward_inverse_identity": compose_map(bundle.forward, bundle.inverse).is_identity()
            and compose_map(bundle.inverse, bundle.forward).is_identity(),
            "forward_maps_X_to_axis": all(all(v == 0 for v in z[1:]) for z in images)
            and len(set(firsts)) == len(firsts),
            "stored_neg_grad_matches_P": bundle.neg_grad == -gradient(bundle.p_poly),
            "stored_hessians_match": list(bundle.hessians) == recomputed_hessians,
        }

    def cmd_verify(self, config: CliConfig) -> int:
        """Audit bundle -> certification report.

        Raises:
            VerificationFailedError: the report was written but does not pass
        """
        bundle = self._load_bundle(config.input_path)
        points = bundle.input.points
        box = self._box(config, points)
        consistency = self._consistency(bundle)
        basin = None
        if config.run_basin:
            basin = basin_sample(
                -gradient(bundle.p_poly), bundle.input, box, config=config.verify, potential=bundle.p_poly
            )
            consistency["basin_fraction"] = basin.passed
            consistency["basin_descends"] = basin.lyapunov_rises == 0
        report = certify_polynomial(
            bundle.p_poly,
            points,
            box=box,
            config=config.verify,
            stored_minors=bundle.minors,
            consistency=consistency,
        )
        doc = report_to_json(report)
        if basin is not None:
            doc["basin"] = basin_to_json(basin)
        path = _save_to_json(doc, config.output_path, source=config.input_path, kind="report")
        readable = _generate_readable_report(path)

        table = Table(title="Certification")
        table.add_column("#")
        table.add_column("point")
        table.add_column("grad = 0")
        table.add_column("minors > 0")
        for i, cert in enumerate(report.per_point):
            table.add_row(
                str(i),
                "(" + ", ".join(str(v) for v in cert.point) + ")",
                str(cert.gradient_is_zero),
                str(all(m > 0 for m in cert.minors)),
            )
        self.console.print(table)
        if basin is not None:
            self.console.print(
                f"basin: {basin.fraction:.3f} of {basin.seeds_used} seeds (seed={basin.seed}) reach X"
            )
        for reason in report.failures():
            self.console.print(f"[red]- {reason}[/red]")
        self._verdict(report.overall_pass, "overall")
        self.console.print(f"Report written to [bold]{path}[/bold] (readable: {readable})")
        if not report.overall_pass:
            raise VerificationFailedError(
                "certification did not pass", failures=len(report.failures()), report=path
            )
        return EXIT_PASS

    def cmd_flow(self, config: CliConfig) -> int:
        if config.start is None:
            raise MalformedInputError("flow needs --start")
        bundle = self._load_bundle(config.input_path)
        xs = bundle.input
        if len(config.start) != xs.dimension:
            raise MalformedInputError("--start has the wrong length", length=len(config.start), dimension=xs.dimension)
        targets = xs.as_floats()
        box = self._box(config, xs.points)
        if not box.inflated(config.verify.escape_factor).contains(config.start)[0]:
            raise MalformedInputError(
                "--start lies outside the escape box",
                start=list(config.start),
                factor=config.verify.escape_factor,
            )

        if config.field == "saddle":
            sf = build_saddle_field(xs)
            field_map, potential = sf.pulled_back, None
            saddles = [[float(v) for v in x] for x in sf.saddle_points_original()]
        else:
            field_map, potential, saddles = -gradient(bundle.p_poly), bundle.p_poly, None

        trace = integrate_flow(
            field_map,
            config.start,
            targets=targets,
            box=box,
            saddles=saddles,
            potential=potential,
            config=config.verify,
        )
        doc = trace_to_json(trace)
        if potential is not None:
            doc["lyapunov_violations"] = lyapunov_violations(trace, config.verify.lyapunov_tol)
        path = _save_to_json(doc, config.output_path, source=config.input_path, kind="trace")

        where = f" {trace.target_index}" if trace.converged else ""
        self.console.print(
            f"{trace.classified}{where} after {trace.steps} steps (dt={trace.dt:g}, |field|={trace.final_grad_norm:.3g})"
        )
        if trace.note:
            self.console.print(f"[yellow]{trace.note}[/yellow]")
        self.console.print(f"Trace written to [bold]{path}[/bold]")
        if not trace.converged:
            raise VerificationFailedError(
                "flow did not converge", classified=trace.classified, steps=trace.steps, trace=path
            )
        return EXIT_PASS

    def cmd_saddle_field(self, config: CliConfig) -> int:
        xs = self._load_points(config.input_path)
        sf = build_saddle_field(xs)
        census = saddle_census(sf, config.verify.eigen_tol)
        path = _save_to_json(
            saddle_field_to_json(sf, census), config.output_path, source=config.input_path, kind="field"
        )
        self.console.print(f"gamma = {sf.gamma.to_text(['x'])}")
        self._verdict(census.passed, "equilibrium census")
        self.console.print(f"Field written to [bold]{path}[/bold]")
        if not census.passed:
            raise VerificationFailedError("equilibrium census did not pass", field=path)
        return EXIT_PASS

    def cmd_export_grid(self, config: CliConfig) -> int:
        bundle = self._load_bundle(config.input_path)
        xs = bundle.input
        if xs.dimension != 2:
            raise UnsupportedOperationError("export-grid only supports n = 2", dimension=xs.dimension)
        if config.resolution < GRID_MIN_RESOLUTION:
            raise MalformedInputError(
                "resolution too small", resolution=config.resolution, minimum=GRID_MIN_RESOLUTION
            )
        box = self._box(config, xs.points)
        raster = basin_raster(-gradient(bundle.p_poly), xs, box, config.resolution, config.verify)
        values = eval_float_batch(bundle.p_poly, raster.seeds, check_finite=False)
        frame = pd.DataFrame(
            {
                "x": raster.seeds[:, 0],
                "y": raster.seeds[:, 1],
                "P": values,
                "basin_label": raster.labels,
            }
        )
        path = _save_to_csv(frame, config.output_path, source=config.input_path)
        unresolved = int(np.count_nonzero(raster.labels == -1))
        self.console.print(f"{len(frame)} grid nodes, {unresolved} unresolved")
        self.console.print(f"Grid written to [bold]{path}[/bold]")
        return EXIT_PASS


def _exact_hessians(bundle: AuditBundle) -> List[List[List[Fraction]]]:
    symbolic = hessian(bundle.p_poly)
    return [
        [[eval_rational(entry, x) for entry in row] for row in symbolic] for x in bundle.input.points
    ]


def main(argv: Optional[Sequence[str]] = None) -> int:
    return TerminalUI().run(argv)


if __name__ == "__main__":
    sys.exit(main())
