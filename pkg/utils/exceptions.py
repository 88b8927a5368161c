# __file__: exceptions.py
#
# __brief__: This file defines custom errors used throughout this project

# =========
import sys
import os

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

from core.constants import (
    ERROR_CODES,
    YELLOW_TEXT,
    RESET_TEXT,
    RED_TEXT,
    EXIT_FAILURE,
    EXIT_PARSE,
    EXIT_HYPOTHESIS,
    EXIT_UNSUPPORTED,
)


class CustomExceptionSuper(Exception):
    """Base for every error raised by the project.

    Args:
        Exception (_type_): Parent class

    Attributes:
        error_key: key into ERROR_CODES
        error_name: printable name
        exit_code: process exit code used by the CLI
    """

    error_key: str = "unknown_error"
    error_name: str = "CustomExceptionSuper"
    exit_code: int = EXIT_FAILURE

    def __init__(self, message="[DEFAULT]", **context):
        super().__init__(message)
        self.context = context

    # Yields the raw error message, if the user wishes to store it in a file
    def __repr__(self) -> str:
        return (
            f"{self.error_name}: {self.args[0]} "
            f"(code: {ERROR_CODES.get(self.error_key, 'N/A')})"
        )

    @property
    def code(self) -> int:
        return ERROR_CODES.get(self.error_key, -1)

    # Yields a formatted error message for the user
    def what(self) -> str:
        """Format the error for a terminal.

        Returns:
            str: returns a formatted error message
        """
        context_str = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return (
            "\n"
            + RED_TEXT
            + "[error]"
            + RESET_TEXT
            + f": {self.error_name.lower()} occurred"
            + YELLOW_TEXT
            + "\n[error code]"
            + RESET_TEXT
            + f": {ERROR_CODES.get(self.error_key, 'N/A')}"
            + YELLOW_TEXT
            + "\n[message]"
            + RESET_TEXT
            + f": {self.args[0]}"
            + YELLOW_TEXT
            + "\n[context]"
            + RESET_TEXT
            + f": {context_str}"
            + "\n"
        )


# ============================ poly_core ============================
class DimensionMismatchError(CustomExceptionSuper):
    """Two polynomials (or a polynomial and a point) live in different ambient dimensions.

    Error Code:
        1001: DimensionMismatchError
    """

    error_key = "dimension_mismatch"
    error_name = "DimensionMismatchError"


class VariableIndexError(CustomExceptionSuper):
    """A variable index is outside [0, dimension).

    Error Code:
        1002: VariableIndexError
    """

    error_key = "variable_index"
    error_name = "VariableIndexError"


class ArityMismatchError(CustomExceptionSuper):
    """A substitution map has the wrong number of components.

    Error Code:
        1003: ArityMismatchError

    How to resolve this error:
        compose(p, m) needs len(m.components) == p.dimension, and
        compose_map(a, b) needs len(b.components) == a.domain_dim.
    """

    error_key = "arity_mismatch"
    error_name = "ArityMismatchError"


class NonFiniteInputError(CustomExceptionSuper):
    """Floating-point evaluation was handed a NaN or an infinity.

    Error Code:
        1004: NonFiniteInputError
    """

    error_key = "non_finite_input"
    error_name = "NonFiniteInputError"


# =========================== morse_scalar ==========================
class EmptyRootListError(CustomExceptionSuper):
    """An AlphaSpec needs at least one root.

    Error Code:
        2001: EmptyRootListError
    """

    error_key = "empty_root_list"
    error_name = "EmptyRootListError"


class ConstantAlphaError(CustomExceptionSuper):
    """Alpha is constant, so it has no zeroes to place minima on.

    Error Code:
        2002: ConstantAlphaError
    """

    error_key = "constant_alpha"
    error_name = "ConstantAlphaError"


class RepeatedRootError(CustomExceptionSuper):
    """Alpha shares a factor with its derivative.

    Error Code:
        2003: RepeatedRootError

    How to resolve this error:
        Every zero of alpha must be simple (alpha(a) = 0 implies alpha'(a) != 0).
        Build alpha from distinct roots with build_alpha() instead.
    """

    error_key = "repeated_root"
    error_name = "RepeatedRootError"


# =========================== coord_change ==========================
class HypothesisViolationError(CustomExceptionSuper):
    """The input point set breaks the construction's hypothesis.

    Error Code:
        3001: HypothesisViolationError

    How to resolve this error:
        The point set must be a finite set of pairwise distinct points
        in R^n with n >= 2.
    """

    error_key = "hypothesis_violation"
    error_name = "HypothesisViolationError"
    exit_code = EXIT_HYPOTHESIS


class InterpolationNodeError(CustomExceptionSuper):
    """Two interpolation nodes share an abscissa.

    Error Code:
        3002: InterpolationNodeError

    How to resolve this error:
        This can only happen if the projection direction was chosen badly,
        so it is an internal bug rather than a user error.
    """

    error_key = "interpolation_node"
    error_name = "InterpolationNodeError"


class DegenerateDirectionError(CustomExceptionSuper):
    """The direction handed to build_linear has a zero first entry.

    Error Code:
        3003: DegenerateDirectionError
    """

    error_key = "degenerate_direction"
    error_name = "DegenerateDirectionError"


# ================================ io ===============================
class MalformedInputError(CustomExceptionSuper):
    """A JSON document, CSV file or command line flag could not be parsed.

    Error Code:
        4001: MalformedInputError
    """

    error_key = "malformed_input"
    error_name = "MalformedInputError"
    exit_code = EXIT_PARSE


class UnsupportedOperationError(CustomExceptionSuper):
    """The requested command does not apply to this input (e.g. a raster for n != 2).

    Error Code:
        4002: UnsupportedOperationError
    """

    error_key = "unsupported_operation"
    error_name = "UnsupportedOperationError"
    exit_code = EXIT_UNSUPPORTED


class VerificationFailedError(CustomExceptionSuper):
    """Raised by the CLI when a report or a trace does not pass.

    Error Code:
        4003: VerificationFailedError
    """

    error_key = "verification_failed"
    error_name = "VerificationFailedError"
    exit_code = EXIT_FAILURE
