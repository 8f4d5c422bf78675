"""Shared input-validation helpers and error types.

Validation failures raise :class:`ValidationError`; structural problems in
binary or JSON artifacts raise :class:`FormatError` naming the offending
field. The CLI maps these to distinct exit codes.
"""

import numpy as np

DISTRIBUTION_ATOL = 1e-9


class ValidationError(ValueError):
    """An input violates a documented precondition."""


class FormatError(Exception):
    """A serialized artifact fails structural validation.

    ``field`` names the header field (or structural element) that failed.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def as_float_vector(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_same_length(a, b, name_a: str, name_b: str) -> None:
    if len(a) != len(b):
        raise ValidationError(
            f"{name_a} and {name_b} must have equal length ({len(a)} != {len(b)})"
        )


def check_unit_interval(p: float, name: str = "p") -> float:
    p = float(p)
    if not np.isfinite(p) or p < 0.0 or p > 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {p!r}")
    return p


def as_distribution(x, name: str = "probabilities") -> np.ndarray:
    """Coerce to a 1-D probability vector; entries >= 0 summing to 1 within 1e-9."""
    arr = as_float_vector(x, name)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if np.any(arr < 0.0):
        raise ValidationError(f"{name} has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > DISTRIBUTION_ATOL:
        raise ValidationError(f"{name} sums to {total!r}, expected 1 within {DISTRIBUTION_ATOL}")
    return arr


def as_feature_matrix(X, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D (n_samples, n_features), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_binary_labels(y, name: str = "y") -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    values = np.unique(arr)
    if not np.all(np.isin(values, (0, 1))):
        raise ValidationError(f"{name} must contain only 0/1 labels, got values {values}")
    return arr.astype(np.int64)
