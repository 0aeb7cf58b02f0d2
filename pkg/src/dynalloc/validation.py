"""Input validation helpers shared across modules.

Each helper returns a validated (and where needed, copied/coerced) numpy
array so callers can rely on dtype, shape and finiteness afterwards.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    BadAlpha,
    LengthMismatch,
    SeriesTooShort,
    ZeroVariance,
)

__all__ = [
    "as_vector",
    "as_matrix",
    "check_alpha",
    "check_lengths",
    "check_min_length",
    "check_nonconstant",
    "check_square",
    "is_symmetric",
]


def as_vector(x, name: str = "series") -> np.ndarray:
    """Coerce to a finite 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1) if arr.size == max(arr.shape, default=0) else arr
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_min_length(x: np.ndarray, n: int, name: str = "series") -> None:
    if len(x) < n:
        raise SeriesTooShort(f"{name} has {len(x)} observations; at least {n} required")


def check_nonconstant(x: np.ndarray, name: str = "series") -> None:
    if np.ptp(x) == 0.0:
        raise ZeroVariance(f"{name} is constant")


def check_lengths(*arrays, names: str = "inputs") -> None:
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise LengthMismatch(f"{names} have inconsistent lengths {sorted(lengths)}")


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise BadAlpha(f"confidence level must be in (0, 1), got {alpha}")
    return alpha


def check_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def is_symmetric(m: np.ndarray, tol: float = 1e-8) -> bool:
    return bool(np.all(np.abs(m - m.T) <= tol * max(1.0, float(np.abs(m).max()))))
