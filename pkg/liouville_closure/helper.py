"""Helper functions for Liouville closure."""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

_LOGGER = logging.getLogger(__name__)

_WARNED: set[tuple] = set()


# ---------------------------
#   warn_once
# ---------------------------
def warn_once(key: tuple, message: str, *args) -> None:
    """Log a warning the first time ``key`` is seen in this process."""
    if key in _WARNED:
        return
    _WARNED.add(key)
    _LOGGER.warning(message, *args)


# ---------------------------
#   as_vector
# ---------------------------
def as_vector(value, name: str = "vector") -> np.ndarray:
    """Return ``value`` as a finite 1-D float array."""
    vec = np.atleast_1d(np.asarray(value, dtype=float))
    if vec.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return vec


# ---------------------------
#   central_gradient
# ---------------------------
def central_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    """Gradient of a scalar function by central differences."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = step
        grad[k] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return grad


# ---------------------------
#   central_jacobian
# ---------------------------
def central_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float) -> np.ndarray:
    """Jacobian J[i, k] = d f_i / d x_k by central differences."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = step
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * step))
    return np.stack(cols, axis=-1)


# ---------------------------
#   central_hessian
# ---------------------------
def central_hessian(fn: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    """Hessian of a scalar function by central differences."""
    x = np.asarray(x, dtype=float)
    n = x.size
    hess = np.empty((n, n))
    f0 = fn(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        hess[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / step**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            val = (fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)) / (4.0 * step**2)
            hess[i, j] = hess[j, i] = val
    return hess


# ---------------------------
#   batch_standard_error
# ---------------------------
def batch_standard_error(batch_values: np.ndarray) -> np.ndarray:
    """Standard error of the mean from per-batch estimates (leading axis)."""
    batch_values = np.asarray(batch_values, dtype=float)
    count = batch_values.shape[0]
    if count < 2:
        return np.full(batch_values.shape[1:], np.inf)
    return batch_values.std(axis=0, ddof=1) / np.sqrt(count)


# ---------------------------
#   paired_mean
# ---------------------------
def paired_mean(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (mean, standard error) of iid samples along the leading axis."""
    samples = np.asarray(samples, dtype=float)
    count = samples.shape[0]
    mean = samples.mean(axis=0)
    if count < 2:
        return mean, np.full(mean.shape, np.inf)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(count)


# ---------------------------
#   parabolic_offset
# ---------------------------
def parabolic_offset(f_minus: float, f_zero: float, f_plus: float) -> float:
    """Vertex of the parabola through three equispaced values, in units of the spacing."""
    denom = f_minus - 2.0 * f_zero + f_plus
    if denom == 0.0 or not np.isfinite(denom):
        return 0.0
    offset = 0.5 * (f_minus - f_plus) / denom
    return float(np.clip(offset, -1.0, 1.0))


# ---------------------------
#   rk4_step
# ---------------------------
def rk4_step(fn: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of an autonomous system."""
    k1 = fn(y)
    k2 = fn(y + 0.5 * h * k1)
    k3 = fn(y + 0.5 * h * k2)
    k4 = fn(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
