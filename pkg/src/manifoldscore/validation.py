"""Input validation helpers shared by the estimator and library surfaces."""

import numpy as np


def check_points(x, ambient_dim=None, name="x"):
    """Validate a point array and return it as a float64 (n, D) matrix.

    Accepts a single point (D,) or a batch (n, D).  Returns the 2-d view and
    a flag telling the caller whether the input was a single point.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a vector or a 2-d array, got shape {arr.shape}")
    if arr.shape[1] == 0 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if ambient_dim is not None and arr.shape[1] != ambient_dim:
        raise ValueError(
            f"{name} has ambient dimension {arr.shape[1]}, expected {ambient_dim}"
        )
    return arr, single


def check_time(t, positive=False):
    """Validate a scalar diffusion time."""
    t = float(t)
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    if positive and t <= 0.0:
        raise ValueError(f"time must be > 0, got {t}")
    if t < 0.0:
        from .errors import NegativeTime

        raise NegativeTime(f"time must be >= 0, got {t}")
    return t


def check_seed(seed):
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    return seed
