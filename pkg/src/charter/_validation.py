"""Small input validation helpers shared by the estimators and functions."""

import math
import numbers

import numpy as np
from sklearn.utils import check_scalar

from .exceptions import InvalidInput


def check_vector(x, name="x", dim=None):
    """Return ``x`` as a finite 1-d float array, optionally of length ``dim``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidInput(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInput(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    return arr


def check_positive(value, name, *, integer=False, allow_inf=False):
    if allow_inf and isinstance(value, numbers.Real) and math.isinf(value) and value > 0:
        return float("inf")
    target = numbers.Integral if integer else numbers.Real
    try:
        return check_scalar(value, name, target, min_val=0, include_boundaries="neither")
    except (TypeError, ValueError) as exc:
        raise InvalidInput(str(exc)) from None


def check_open_unit(value, name):
    """Validate ``value`` in the open interval (0, 1)."""
    try:
        return check_scalar(value, name, numbers.Real, min_val=0, max_val=1,
                            include_boundaries="neither")
    except (TypeError, ValueError) as exc:
        raise InvalidInput(str(exc)) from None
