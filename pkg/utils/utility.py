# __file__: utility.py
#
# __brief__: File helpers used by the CLI: JSON in/out, CSV rasters and the readable report.

# =========
import sys
import os

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

import json
import time

import pandas as pd

from utils.exceptions import MalformedInputError
from utils.logger import setup_logger

# ==========
utility_logger = setup_logger(name="utility.py_logger", log_file="utility.log")
# ==========

utility_logger.info("utility_logger")

_PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))


def _read_json(file_name: str) -> dict:
    """Load a JSON document.

    Args:
        file_name (str): path to the file

    Raises:
        MalformedInputError: missing file or invalid JSON

    Returns:
        dict: the parsed document
    """
    try:
        with open(file_name, "r", encoding="utf-8") as file:
            doc = json.load(file)
    except FileNotFoundError as e:
        raise MalformedInputError("input file not found", path=file_name) from e
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedInputError("input is not valid JSON", path=file_name, reason=str(e)) from e

    utility_logger.info(f"File '{file_name}' read successfully.")
    return doc


def _default_path(kind: str, source: str, extension: str) -> str:
    # data/report/<kind>_<source>_<timestamp>.<extension>
    out_dir = os.path.join(_PROJECT_ROOT, "data", "report")
    os.makedirs(out_dir, exist_ok=True)
    base_name = os.path.splitext(os.path.basename(source))[0]
    timestamp = time.strftime("%Y%m%d_%H%M%S")
    return os.path.join(out_dir, f"{kind}_{base_name}_{timestamp}.{extension}")


def _save_to_json(doc: dict, file_path: str = None, source: str = "morseforge", kind: str = "report") -> str:
    """Write a document as indented JSON.

    Args:
        doc (dict): JSON-serialisable document
        file_path (str, optional): destination; a timestamped file under data/report when None
        source (str, optional): input file name, used for the default name
        kind (str, optional): prefix for the default name

    Returns:
        str: path of the written file
    """
    file_path = file_path or _default_path(kind, source, "json")
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)

    with open(file_path, "w", encoding="utf-8") as json_file:
        json.dump(doc, json_file, indent=4)
        json_file.write("\n")

    utility_logger.info(f"JSON saved to: {file_path}")
    return file_path


def _save_to_csv(frame: pd.DataFrame, file_path: str = None, source: str = "morseforge") -> str:
    file_path = file_path or _default_path("grid", source, "csv")
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    # repr-exact floats so values can be compared bit for bit after reading back
    frame.to_csv(file_path, index=False, float_format="%.17g")
    utility_logger.info(f"CSV saved to: {file_path} ({len(frame)} rows)")
    return file_path


def _generate_readable_report(report_path: str) -> str:
    """Markdown summary of a certification report, written under data/readable.

    Args:
        report_path (str): a JSON report written by `verify`

    Returns:
        str: path of the Markdown file
    """
    report = _read_json(report_path)

    report_dir = os.path.join(_PROJECT_ROOT, "data", "readable")
    base_name = os.path.splitext(os.path.basename(report_path))[0]
    file_path = os.path.join(report_dir, f"{base_name}_readable.md")
    os.makedirs(report_dir, exist_ok=True)

    with open(file_path, "w", encoding="utf-8") as out:
        out.write("# ===== CRITICAL SET CERTIFICATION REPORT =====\n\n")
        verdict = "PASS" if report.get("overall_pass") else "FAIL"
        out.write(f"**Overall**: `{verdict}`\n\n")
        out.write("---\n")

        # ================ PER POINT ====================
        out.write("## Prescribed Points:\n\n")
        points = report.get("per_point", [])
        if points:
            out.write("| # | Point | Gradient exactly zero | Leading minors | Pass |\n")
            out.write("|---|-------|-----------------------|----------------|------|\n")
            for i, item in enumerate(points):
                point = ", ".join(item["point"])
                minors = ", ".join(item["minors"])
                out.write(
                    f"| {i} | `({point})` | `{item['gradient_residual']}` | `{minors}` | `{item['pass']}` |\n"
                )
            out.write("\n")
        else:
            out.write("*No points were certified.*\n\n")
        # ===============================================

        out.write("---\n")

        # ============== NEWTON SEARCH ==================
        out.write("## Spurious Critical Point Search:\n\n")
        search = report.get("spurious_search", {})
        box = search.get("box", {})
        out.write(f"  - **Box**: `{box.get('lower')}` to `{box.get('upper')}`\n")
        out.write(f"    * {box.get('derivation', '')}\n")
        out.write(f"  - **Seeds**: `{search.get('seeds_used')}`, singular: `{search.get('singular_seeds')}`, ")
        out.write(f"unconverged: `{search.get('unconverged_seeds')}`\n")
        out.write(f"  - **All converged points near X**: `{search.get('all_within_tol_of_X')}`\n")
        for point in search.get("converged_points", []):
            out.write(f"    * `{point}`\n")
        out.write("\n")
        # ===============================================

        out.write("---\n")

        # ============== CONSISTENCY ====================
        out.write("### Bundle Consistency:\n\n")
        checks = report.get("consistency", {})
        if not checks:
            out.write("  - *No consistency checks were run.*\n\n")
        for name, ok in checks.items():
            out.write(f"  - `{name}`: `{ok}`\n")

        failures = report.get("failures", [])
        if failures:
            out.write("\n### Failures:\n\n")
            for reason in failures:
                out.write(f"  - {reason}\n")
        out.write("\n---\n")
        out.write("# ===== END OF REPORT =====\n")

    utility_logger.info(f"Readable report saved to: {file_path}")
    return file_path
