# __file__: exact_linalg.py
#
# __brief__: Small exact matrix helpers over Fractions (and over MultiPoly for determinants)

import os
# =========
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# =========

from fractions import Fraction
from typing import List, Sequence

from utils.exceptions import DimensionMismatchError, MalformedInputError

Matrix = List[List[Fraction]]


def _check_square(matrix: Sequence[Sequence], function: str) -> int:
    n = len(matrix)
    if any(len(row) != n for row in matrix):
        raise DimensionMismatchError("matrix is not square", rows=n, function=function)
    return n


def identity(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def transpose(matrix: Sequence[Sequence]) -> list:
    return [list(col) for col in zip(*matrix)] if matrix else []


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list:
    if a and len(a[0]) != len(b):
        raise DimensionMismatchError("inner dimensions differ", left=len(a[0]), right=len(b))
    columns = transpose(b)
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in columns] for row in a]


def matvec(a: Sequence[Sequence], v: Sequence) -> list:
    return [sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in a]


def determinant(matrix: Sequence[Sequence[Fraction]]) -> Fraction:
    """Exact determinant by fraction-valued Gaussian elimination."""
    n = _check_square(matrix, "determinant()")
    work = [[Fraction(x) for x in row] for row in matrix]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            det = -det
        det *= work[col][col]
        for r in range(col + 1, n):
            factor = work[r][col] / work[col][col]
            if factor:
                for c in range(col, n):
                    work[r][c] -= factor * work[col][c]
    return det


def inverse(matrix: Sequence[Sequence[Fraction]]) -> Matrix:
    """Exact inverse by Gauss-Jordan elimination.

    Raises:
        MalformedInputError: the matrix is singular
    """
    n = _check_square(matrix, "inverse()")
    work = [[Fraction(x) for x in row] + identity(n)[i] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot is None:
            raise MalformedInputError("matrix is singular", function="inverse()")
        work[col], work[pivot] = work[pivot], work[col]
        lead = work[col][col]
        work[col] = [x / lead for x in work[col]]
        for r in range(n):
            if r != col and work[r][col] != 0:
                factor = work[r][col]
                work[r] = [x - factor * y for x, y in zip(work[r], work[col])]
    return [row[n:] for row in work]


def leading_minors(matrix: Sequence[Sequence[Fraction]]) -> List[Fraction]:
    """Determinants of the top-left 1x1, 2x2, ..., nxn blocks (Sylvester's criterion)."""
    n = _check_square(matrix, "leading_minors()")
    return [determinant([row[:k] for row in matrix[:k]]) for k in range(1, n + 1)]


def is_positive_definite(matrix: Sequence[Sequence[Fraction]]) -> bool:
    return all(m > 0 for m in leading_minors(matrix))


def cofactor_determinant(matrix: Sequence[Sequence]):
    """Laplace expansion along the first row.

    Works for any commutative ring elements (used on matrices of MultiPoly),
    so it stays division free. Only meant for the small n of Jacobians here.
    """
    n = _check_square(matrix, "cofactor_determinant()")
    if n == 1:
        return matrix[0][0]
    if n == 2:
        return matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]
    total = None
    for col in range(n):
        entry = matrix[0][col]
        if entry == 0:
            continue
        minor = [row[:col] + row[col + 1:] for row in matrix[1:]]
        term = entry * cofactor_determinant(minor)
        if col % 2:
            term = -term
        total = term if total is None else total + term
    if total is None:
        return matrix[0][0] * 0
    return total
