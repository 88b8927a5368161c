# __file__: constants.py
#
# __brief__: This file holds all the constants used in the project in one place, avoiding shotgun surgery

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

# Codes shown by CustomExceptionSuper.what(), grouped by module
ERROR_CODES: dict = {
    "dimension_mismatch": 1001,
    "variable_index": 1002,
    "arity_mismatch": 1003,
    "non_finite_input": 1004,
    "empty_root_list": 2001,
    "constant_alpha": 2002,
    "repeated_root": 2003,
    "hypothesis_violation": 3001,
    "interpolation_node": 3002,
    "degenerate_direction": 3003,
    "malformed_input": 4001,
    "unsupported_operation": 4002,
    "verification_failed": 4003,
}

# CLI exit codes are a stable contract
EXIT_PASS: int = 0
EXIT_FAILURE: int = 1
EXIT_PARSE: int = 2
EXIT_HYPOTHESIS: int = 3
EXIT_UNSUPPORTED: int = 4

YELLOW_TEXT: str = "\033[33m"
RESET_TEXT: str = "\033[0m"
RED_TEXT: str = "\033[31m"

LOG_COLORS = {
    "DEBUG": "cyan",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "bold_red",
}

# ===== Newton search =====
NEWTON_RESIDUAL_TOL: float = 1e-12  # scaled, @see verify._scaled_residual()
NEWTON_DEDUP_TOL: float = 1e-8
NEWTON_MAX_ITER: int = 100
NEWTON_SEEDS_PER_AXIS: int = 10
NEWTON_COND_LIMIT: float = 1e15  # Hessians with a larger 2-norm condition number count as singular
SOUNDNESS_TOL: float = 1e-6

# ===== Flow integration =====
FLOW_DT: float = 1e-3
FLOW_T_MAX: float = 200.0
FLOW_GRAD_TOL: float = 1e-8
FLOW_POINT_TOL: float = 1e-4
FLOW_ESCAPE_FACTOR: float = 10.0
FLOW_SAMPLE_EVERY: int = 10
FLOW_MAX_HALVINGS: int = 3  # retries of a seed that left the escape box, each with half the previous dt
FLOW_STABILITY_BOUND: float = 2.0  # step * |Jacobian|_F stays below this; inside the RK4 stability interval
FLOW_MOVE_FRACTION: float = 0.05  # one step travels at most this share of the shortest box side
FLOW_STEP_BUDGET: int = 4  # steps allowed per seed, as a multiple of t_max / dt
FLOW_MIN_STEP_BUDGET: int = 10000
LYAPUNOV_TOL: float = 1e-9

# ===== Misc numerics =====
FD_STEP: float = 1e-6
EIGEN_TOL: float = 1e-9
BOX_INFLATION: float = 2.0
BOX_MARGIN: float = 1.0
BASIN_SEEDS: int = 1000
BASIN_PASS_FRACTION: float = 0.95
GRID_MIN_RESOLUTION: int = 8
GRID_DEFAULT_RESOLUTION: int = 64

DEFAULT_SEED: int = 0
SEED_ENV_VAR: str = "MORSEFORGE_SEED"

BUNDLE_FORMAT: str = "morseforge.bundle/1"
REPORT_FORMAT: str = "morseforge.report/1"
TRACE_FORMAT: str = "morseforge.trace/1"
FIELD_FORMAT: str = "morseforge.saddle_field/1"

_DATA_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), "../tests/data/"))

FIXTURE_PATHS = {
    "origin_2d": os.path.join(_DATA_DIR, "points_origin_2d.json"),
    "origin_3d": os.path.join(_DATA_DIR, "points_origin_3d.json"),
    "axis_pair": os.path.join(_DATA_DIR, "points_axis_pair.json"),
    "vertical_pair": os.path.join(_DATA_DIR, "points_vertical_pair.json"),
    "triangle": os.path.join(_DATA_DIR, "points_triangle.json"),
    "one_dimensional": os.path.join(_DATA_DIR, "points_one_dimensional.json"),
    "duplicates": os.path.join(_DATA_DIR, "points_duplicates.json"),
    "malformed": os.path.join(_DATA_DIR, "points_malformed.json"),
    "space_pair": os.path.join(_DATA_DIR, "points_space_pair.json"),
}
