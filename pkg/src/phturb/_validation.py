"""Input validation helpers used by the public functions and estimators."""

from numbers import Integral

import numpy as np
from sklearn.utils.validation import check_array


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_series(x, name="x", min_length=1):
    """Return ``x`` as a finite 1-D float array of at least ``min_length``."""
    arr = np.asarray(getattr(x, "values", x), dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.shape[0] < min_length:
        from .exceptions import TooShort

        raise TooShort(f"{name} has length {arr.shape[0]}; at least {min_length} required")
    return arr


def check_points(points, name="points"):
    """2-D float array of shape (n_points, n_dims), at least one point."""
    return check_array(points, ensure_2d=True, dtype=float, input_name=name)


def check_unit_interval(x, name):
    arr = check_series(x, name)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} must be scaled to [0, 1]")
    return arr


def check_distance_matrix(dm):
    dm = check_array(dm, ensure_2d=True, dtype=float, input_name="distance matrix")
    n, m = dm.shape
    if n != m:
        raise ValueError(f"distance matrix must be square, got {dm.shape}")
    if np.any(np.diag(dm) != 0.0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(dm < 0.0):
        raise ValueError("distance matrix entries must be nonnegative")
    if not np.array_equal(dm, dm.T):
        raise ValueError("distance matrix must be symmetric")
    return dm
