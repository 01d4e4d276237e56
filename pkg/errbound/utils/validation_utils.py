"""
errbound/utils/validation_utils.py

Purpose: Input validation

- Number parsing (decimal and scientific notation)
- Vector and matrix coercion with finiteness checks
- Dimension checks shared by every service
"""

import re
from typing import List, Optional, Sequence

import numpy as np

from errbound.core.exceptions import ContractViolationError
from errbound.utils.constants import MSG_DIMENSION_MISMATCH

NUMBER_PATTERN = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

# Typographic minus signs are accepted in hand-written files
_MINUS_SIGNS = str.maketrans({"−": "-", "–": "-"})


def normalize_number_text(text: str) -> str:
    """
    Strips whitespace and replaces typographic minus signs.

    Args:
        text: Raw token

    Returns:
        Cleaned token
    """
    return text.strip().translate(_MINUS_SIGNS)


def is_number(text: str) -> bool:
    """
    Checks a token against the number grammar (decimal or scientific).

    Args:
        text: Token to check

    Returns:
        True if the token is a finite decimal number
    """
    if not text:
        return False
    return bool(NUMBER_PATTERN.match(normalize_number_text(text)))


def parse_number(text: str) -> float:
    """
    Parses one number token.

    Raises:
        ValueError: If the token is not a number
    """
    cleaned = normalize_number_text(text)
    if not NUMBER_PATTERN.match(cleaned):
        raise ValueError(f"'{text.strip()}' is not a number")
    return float(cleaned)


def parse_number_list(text: str, separator: str = ",") -> List[float]:
    """
    Parses a separated list of numbers; empty input gives an empty list.
    """
    if not text.strip():
        return []
    return [parse_number(token) for token in text.split(separator)]


def as_vector(values, name: str = "vector", dim: Optional[int] = None) -> np.ndarray:
    """
    Coerces input to a finite 1-D float array.

    Args:
        values: Scalar or sequence of reals
        name: Used in error messages
        dim: Required length, if any

    Returns:
        Read-only float64 array

    Raises:
        ContractViolationError: Empty, non-finite or wrong length
    """
    vector = np.atleast_1d(np.asarray(values, dtype=float))
    if vector.ndim != 1 or vector.size == 0:
        raise ContractViolationError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(vector)):
        raise ContractViolationError(f"{name} has non-finite entries")
    if dim is not None:
        check_dim(name, dim, vector.size)
    vector = vector.copy()
    vector.setflags(write=False)
    return vector


def as_matrix(values, name: str = "matrix", shape: Optional[Sequence[Optional[int]]] = None) -> np.ndarray:
    """
    Coerces input to a finite 2-D float array; a 1-D input becomes one row.
    """
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-D")
    if not np.all(np.isfinite(matrix)):
        raise ContractViolationError(f"{name} has non-finite entries")
    if shape is not None:
        rows, cols = shape
        if rows is not None:
            check_dim(f"{name} rows", rows, matrix.shape[0])
        if cols is not None:
            check_dim(f"{name} columns", cols, matrix.shape[1])
    matrix = matrix.copy()
    matrix.setflags(write=False)
    return matrix


def check_dim(what: str, expected: int, actual: int) -> None:
    """
    Raises ContractViolationError when two dimensions differ.
    """
    if expected != actual:
        raise ContractViolationError(
            MSG_DIMENSION_MISMATCH.format(what=what, expected=expected, actual=actual)
        )


def is_strictly_decreasing(values: Sequence[float]) -> bool:
    """
    True when values are positive and strictly decreasing.
    """
    if not values or any(v <= 0 for v in values):
        return False
    return all(a > b for a, b in zip(values, values[1:]))
