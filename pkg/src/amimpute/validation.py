"""Input validation helpers used throughout the package.

All helpers return validated ``float64``/``int64`` arrays so downstream
numerics never have to re-check dtypes, and raise :class:`DataError` with
the offending argument named.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DataError


def as_float_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def as_float_2d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def as_int_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(np.asarray(arr, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(arr, dtype=np.float64)):
            raise DataError(f"{name} must contain integers")
        arr = rounded
    return arr.astype(np.int64)


def check_lengths(n: int, name: str, *arrays_with_names) -> None:
    for arr, arr_name in arrays_with_names:
        if len(arr) != n:
            raise DataError(
                f"{arr_name} has length {len(arr)}, expected {n} to match {name}"
            )


def check_unit_interval(x: np.ndarray, name: str, tol: float = 0.0) -> None:
    if x.size == 0:
        return
    lo, hi = float(np.min(x)), float(np.max(x))
    if lo < -tol or hi > 1.0 + tol:
        raise DataError(f"{name} must lie in [0, 1], found range [{lo}, {hi}]")


def check_positive(value: float, name: str) -> None:
    if not value > 0:
        raise DataError(f"{name} must be positive, got {value}")


def check_weights(weights, n: int) -> np.ndarray | None:
    """Validate optional observation weights: length n, strictly positive."""
    if weights is None:
        return None
    w = as_float_1d(weights, "weights")
    if len(w) != n:
        raise DataError(f"weights has length {len(w)}, expected {n}")
    if np.any(w <= 0):
        raise DataError("weights must be strictly positive")
    return w


def round_if_close(value: float, tol: float = 1e-9) -> tuple[float, bool]:
    """Snap a float to the nearest integer when it is within ``tol`` of one.

    Guards integer quantities computed through float arithmetic
    (e.g. sampling rates times stratum sizes).
    """
    nearest = round(value)
    if abs(value - nearest) <= tol * max(1.0, abs(value)):
        return float(nearest), True
    return value, False
