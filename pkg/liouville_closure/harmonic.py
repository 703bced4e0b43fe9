"""Closed forms of the exactly solvable harmonic system.

The surrogate has g = 1, M = 0 and phi = kappa^2 u^2, so the Lagrangian is
(u_dot^2 + kappa^2 u^2) / 2 and every path quantity is elementary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .const import DEFAULT_FIGURE_STEP, OVERFLOW_KAPPA_T
from .exceptions import HarmonicOverflowError, InvalidParameterError
from .lagrangian import Path

_LOGGER = logging.getLogger(__name__)


# ---------------------------
#   HarmonicSpec
# ---------------------------
@dataclass(frozen=True)
class HarmonicSpec:
    """Relaxation rate, initial coordinate and averaging timescale."""

    kappa: float
    u0: float
    delta_t: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.kappa) and self.kappa > 0.0):
            raise InvalidParameterError(f"kappa must be positive, got {self.kappa}")
        if not (np.isfinite(self.delta_t) and self.delta_t > 0.0):
            raise InvalidParameterError(f"delta_t must be positive, got {self.delta_t}")
        if not np.isfinite(self.u0):
            raise InvalidParameterError("u0 must be finite")


def _guard(spec: HarmonicSpec, horizon: float) -> float:
    kt = spec.kappa * horizon
    if not kt > 0.0:
        raise InvalidParameterError(f"kappa*T must be positive, got {kt}")
    if kt >= OVERFLOW_KAPPA_T:
        raise HarmonicOverflowError(f"kappa*T = {kt:g} overflows the closed forms; use the asymptotic forms (sech ~ 2 exp(-kappa t))")
    return kt


def sech(x):
    """Overflow-free hyperbolic secant."""
    x = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-x)
    return 2.0 * e / (1.0 + e * e)


# ---------------------------
#   extremal_closed
# ---------------------------
def extremal_closed(spec: HarmonicSpec, uT: float, T: float, t):
    """Euler-Lagrange solution A e^{kappa t} + B e^{-kappa t} through both endpoints."""
    kt = _guard(spec, T)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > T):
        raise InvalidParameterError("t must lie in [0, T]")
    b = 0.5 * (spec.u0 * np.exp(kt) - uT) / np.sinh(kt)
    a = spec.u0 - b
    value = a * np.exp(spec.kappa * t_arr) + b * np.exp(-spec.kappa * t_arr)
    return float(value) if value.ndim == 0 else value


# ---------------------------
#   extremal_action_closed
# ---------------------------
def extremal_action_closed(spec: HarmonicSpec, uT, T: float):
    """S_e = kappa/2 [coth(kT)(u0^2 + uT^2) - 2 u0 uT csch(kT)]."""
    kt = _guard(spec, T)
    uT = np.asarray(uT, dtype=float)
    value = 0.5 * spec.kappa * ((spec.u0**2 + uT**2) / np.tanh(kt) - 2.0 * spec.u0 * uT / np.sinh(kt))
    return float(value) if value.ndim == 0 else value


# ---------------------------
#   thermo_path
# ---------------------------
def thermo_path(spec: HarmonicSpec, t):
    """u0 sech(kappa t)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise InvalidParameterError("t must be non-negative")
    value = spec.u0 * sech(spec.kappa * t_arr)
    return float(value) if value.ndim == 0 else value


# ---------------------------
#   kernel_closed
# ---------------------------
def kernel_closed(spec: HarmonicSpec, uT, T: float):
    """exp(-Delta_t S_e) normalised to unit mass over uT."""
    kt = _guard(spec, T)
    precision = spec.delta_t * spec.kappa / np.tanh(kt)
    peak = spec.u0 / np.cosh(kt)
    shift = extremal_action_closed(spec, uT, T) - extremal_action_closed(spec, peak, T)
    value = np.sqrt(precision / (2.0 * np.pi)) * np.exp(-spec.delta_t * np.asarray(shift))
    return float(value) if value.ndim == 0 else value


def kernel_variance(spec: HarmonicSpec, T: float) -> float:
    """Variance of the Gaussian kernel in uT."""
    kt = _guard(spec, T)
    return float(np.tanh(kt) / (spec.delta_t * spec.kappa))


def restarted_value(spec: HarmonicSpec, t_restart: float, t):
    """Thermodynamical path relaunched at ``t_restart`` from the original value."""
    start = thermo_path(spec, t_restart)
    t_arr = np.asarray(t, dtype=float)
    value = start * sech(spec.kappa * (t_arr - t_restart))
    return float(value) if value.ndim == 0 else value


# ---------------------------
#   restart_experiment
# ---------------------------
def restart_experiment(spec: HarmonicSpec, t_restart: float, horizon: float, step: float = DEFAULT_FIGURE_STEP) -> tuple[Path, Path]:
    """Original and restarted thermodynamical paths on uniform grids."""
    if not 0.0 < t_restart < horizon:
        raise InvalidParameterError("t_restart must lie strictly inside (0, horizon)")
    times = np.linspace(0.0, horizon, int(round(horizon / step)) + 1)
    original = Path(times, thermo_path(spec, times))
    later = np.linspace(t_restart, horizon, int(round((horizon - t_restart) / step)) + 1)
    restarted = Path(later, restarted_value(spec, t_restart, later))
    _LOGGER.debug("restart at %.3f from %.6f", t_restart, restarted.points[0, 0])
    return original, restarted
