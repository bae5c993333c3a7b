"""Input checks shared by the estimators and the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length, column_or_1d


def as_times(X) -> np.ndarray:
    """Accept a 1-D vector of times or an ``(n, 1)`` column; return 1-D float64."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        arr = check_array(arr, ensure_2d=True, dtype=np.float64)
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single time column, got shape {arr.shape}")
        return arr[:, 0]
    return column_or_1d(check_array(arr, ensure_2d=False, dtype=np.float64))


def as_vector(y, name="y") -> np.ndarray:
    arr = check_array(np.asarray(y, dtype=float), ensure_2d=False, dtype=np.float64,
                      input_name=name)
    return column_or_1d(arr)


def check_points(t, c, t_sd=None, c_sd=None, *, min_points=1):
    """Validate a (time, energy) point cloud and its optional spreads."""
    t = as_times(t)
    c = as_vector(c, "c")
    check_consistent_length(t, c)
    if len(t) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(t)}")
    if np.any(t <= 0):
        raise ValueError("execution times must be positive")
    if np.any(c < 0):
        raise ValueError("energies must be nonnegative")
    out = [t, c]
    for name, sd in (("t_sd", t_sd), ("c_sd", c_sd)):
        if sd is None:
            out.append(None)
            continue
        sd = as_vector(sd, name)
        check_consistent_length(t, sd)
        if np.any(sd < 0):
            raise ValueError(f"{name} must be nonnegative")
        out.append(sd)
    return tuple(out)
