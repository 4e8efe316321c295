"""Input validation helpers used at public API boundaries."""
from __future__ import annotations

import numpy as np


class ValidationError(ValueError):
    """Raised when an input fails a documented precondition."""


def as_float_array(x, name: str, shape=None, dtype=np.float64) -> np.ndarray:
    arr = np.asarray(x, dtype=dtype)
    if shape is not None and arr.shape != tuple(shape):
        raise ValidationError(f"{name}: expected shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite values")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name}: must be a positive finite number, got {value}")
    return value


def check_dims(dims, name: str = "dims") -> tuple:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ValidationError(f"{name}: need three positive integers, got {dims}")
    return dims


def check_rotation(r, name: str = "rotation", tol: float = 1e-6) -> np.ndarray:
    r = as_float_array(r, name, shape=(3, 3))
    if not np.allclose(r @ r.T, np.eye(3), atol=tol):
        raise ValidationError(f"{name}: not orthonormal")
    if np.linalg.det(r) < 0:
        raise ValidationError(f"{name}: determinant is negative (left-handed)")
    return r
