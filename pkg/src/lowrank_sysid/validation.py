"""Input validation helpers used by the estimators and generators."""

import numpy as np

from .errors import InvalidInputError


def check_samples(y, name="y", min_len=1):
    """Coerce a sample sequence (array-like or TimeSeries) to a 1-D float array."""
    data = getattr(y, "samples", y)
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name}: expected a 1-D sample sequence, got shape {arr.shape}")
    if arr.size < min_len:
        raise InvalidInputError(f"{name}: need at least {min_len} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: samples must be finite")
    return arr


def check_equal_length(first, second, name_a="y1", name_b="y2"):
    if len(first) != len(second):
        raise InvalidInputError(
            f"{name_a} and {name_b} must have equal length ({len(first)} != {len(second)})"
        )


def check_order(k, name="order"):
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise InvalidInputError(f"{name} must be a nonnegative integer, got {k!r}")
    return int(k)
