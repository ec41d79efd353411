"""
Parameter validation helpers

Module-level versions of the range/choice/type checks every public
operation runs on its inputs before touching numpy.
"""

import math
from typing import Any, Iterable, Union

import numpy as np

from .exceptions import InvalidParameterError

Number = Union[int, float]


def validate_choices(name: str, value: Any, choices: Iterable[Any]) -> None:
    """Validate value is in allowed choices"""
    choices = list(choices)
    if value not in choices:
        raise InvalidParameterError(name, value, f"Must be one of: {choices}")


def validate_finite(name: str, value) -> None:
    """Validate a scalar or array contains only finite numbers"""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(name, value if arr.ndim == 0 else "<array>",
                                    "Must be finite")


def validate_positive(name: str, value: Number) -> None:
    """Validate a finite, strictly positive scalar"""
    if not isinstance(value, (int, float, np.integer, np.floating)) or not math.isfinite(value) \
            or value <= 0:
        raise InvalidParameterError(name, value, "Must be a finite positive number")


def validate_integer(name: str, value: Any, min_val: int = None) -> None:
    """Validate an integer (bools rejected), optionally bounded below"""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InvalidParameterError(name, value, "Must be int")
    if min_val is not None and value < min_val:
        raise InvalidParameterError(name, value, f"Must be >= {min_val}")
