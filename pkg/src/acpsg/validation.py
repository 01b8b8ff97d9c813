"""Input validation helpers used by the estimators and the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InvalidValue, ShapeError


def as_matrix(m, name: str = "matrix", allow_empty: bool = False) -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array or raise."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not allow_empty and m.size == 0:
        raise ShapeError(f"{name} is empty")
    bad = np.flatnonzero(~np.isfinite(m.ravel()))
    if bad.size:
        raise InvalidValue(f"{name} has a non-finite entry at flat index {bad[0]}")
    return m


def check_features(X, name: str = "X") -> np.ndarray:
    """sklearn-style samples-as-rows feature check."""
    return check_array(X, dtype=np.float64, ensure_all_finite=True, input_name=name)


def check_labels(y, n_samples: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        y = y.ravel()
    if y.size and not np.all(np.asarray(y, dtype=np.float64) == np.round(np.asarray(y, dtype=np.float64))):
        raise InvalidValue(f"{name} must contain integer class indices")
    y = y.astype(np.int64)
    if n_samples is not None and y.shape[0] != n_samples:
        raise ShapeError(f"{name} has {y.shape[0]} entries but there are {n_samples} samples")
    if y.size and y.min() < 0:
        raise InvalidValue(f"{name} contains a negative class index")
    return y


def same_rows(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"{what}: row counts differ ({a.shape[0]} vs {b.shape[0]})")
