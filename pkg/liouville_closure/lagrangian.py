"""Information-loss Lagrangian and related functionals."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .const import DEFAULT_W_REV
from .exceptions import InvalidParameterError
from .geometry import GeometryPoint, GeometryProvider
from .helper import as_vector

_LOGGER = logging.getLogger(__name__)


# ---------------------------
#   LagrangianContext
# ---------------------------
@dataclass(frozen=True)
class LagrangianContext:
    """Geometry provider plus the averaging timescale and IL_rev weight."""

    provider: GeometryProvider
    delta_t: float
    w_rev: float = DEFAULT_W_REV

    def __post_init__(self) -> None:
        if not (np.isfinite(self.delta_t) and self.delta_t > 0.0):
            raise InvalidParameterError(f"delta_t must be positive, got {self.delta_t}")
        if not (np.isfinite(self.w_rev) and self.w_rev >= 0.0):
            raise InvalidParameterError(f"w_rev must be non-negative, got {self.w_rev}")

    @property
    def m(self) -> int:
        return self.provider.m

    def geometry(self, lam) -> GeometryPoint:
        return self.provider.point(lam)

    def potential(self, pt: GeometryPoint) -> float:
        """w_rev (phi - M g^-1 M) + M g^-1 M; equals phi at unit weight."""
        return self.w_rev * pt.il_rev_density + pt.m_g_m


# ---------------------------
#   Path
# ---------------------------
@dataclass(frozen=True)
class Path:
    """Manifold coordinates on a strictly increasing time grid."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if times.ndim != 1 or times.size != points.shape[0]:
            raise InvalidParameterError("times and points disagree in length")
        if times.size > 1 and not np.all(np.diff(times) > 0.0):
            raise InvalidParameterError("path times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(points))):
            raise InvalidParameterError("path contains non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.times.size

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the path at time ``t``."""
        return np.array([np.interp(t, self.times, self.points[:, k]) for k in range(self.m)])


# ---------------------------
#   lagrangian_value
# ---------------------------
def lagrangian_value(ctx: LagrangianContext, lam, lambda_dot) -> float:
    """The information-loss Lagrangian at (lambda, lambda_dot)."""
    pt = ctx.geometry(lam)
    return lagrangian_from_geometry(ctx, pt, as_vector(lambda_dot, "lambda_dot"))


def lagrangian_from_geometry(ctx: LagrangianContext, pt: GeometryPoint, lambda_dot: np.ndarray) -> float:
    kinetic = lambda_dot @ pt.g @ lambda_dot - 2.0 * lambda_dot @ pt.M
    return 0.5 * float(kinetic) + 0.5 * ctx.potential(pt)


# ---------------------------
#   il_decompose
# ---------------------------
def il_decompose(ctx: LagrangianContext, lam, lambda_dot) -> tuple[float, float, float]:
    """Return (il, il_rev, il_irr) for one averaging window."""
    pt = ctx.geometry(lam)
    v = as_vector(lambda_dot, "lambda_dot")
    scale = 0.5 * ctx.delta_t**2
    dev = v - pt.reversible_velocity
    il = scale * float(v @ pt.g @ v - 2.0 * v @ pt.M + pt.phi)
    il_rev = scale * pt.il_rev_density
    il_irr = scale * float(dev @ pt.g @ dev)
    return il, il_rev, il_irr


# ---------------------------
#   discrete_action
# ---------------------------
def discrete_action(ctx: LagrangianContext, path: Path) -> float:
    """Delta_t times the midpoint-rule integral of the Lagrangian along ``path``."""
    if len(path) < 2:
        raise InvalidParameterError("a path needs at least two nodes")
    steps = np.diff(path.times)
    velocities = np.diff(path.points, axis=0) / steps[:, None]
    mids = 0.5 * (path.points[1:] + path.points[:-1])
    total = 0.0
    for dt, v, mid in zip(steps, velocities, mids):
        total += dt * lagrangian_from_geometry(ctx, ctx.geometry(mid), v)
    return ctx.delta_t * total


# ---------------------------
#   fw_hamiltonian
# ---------------------------
def fw_hamiltonian(ctx: LagrangianContext, p, lam) -> float:
    """Legendre dual of the Lagrangian, 1/2 (p+M) g^-1 (p+M) - 1/2 phi."""
    pt = ctx.geometry(lam)
    shifted = as_vector(p, "p") + pt.M
    return 0.5 * float(shifted @ np.linalg.solve(pt.g, shifted)) - 0.5 * ctx.potential(pt)


# ---------------------------
#   hj_residual
# ---------------------------
def hj_residual(ctx: LagrangianContext, f_grad, f_t: float, lam) -> float:
    return fw_hamiltonian(ctx, f_grad, lam) + float(f_t)


# ---------------------------
#   completed_square
# ---------------------------
def completed_square(ctx: LagrangianContext, lam, lambda_dot, f_grad) -> float:
    """1/2 (lambda_dot - Phi) g (lambda_dot - Phi) with Phi = g^-1 (grad f + M)."""
    pt = ctx.geometry(lam)
    drift = np.linalg.solve(pt.g, as_vector(f_grad, "f_grad") + pt.M)
    dev = as_vector(lambda_dot, "lambda_dot") - drift
    return 0.5 * float(dev @ pt.g @ dev)


def reversible_velocity(pt: GeometryPoint) -> np.ndarray:
    return pt.reversible_velocity


# ---------------------------
#   entropy_rate_excess
# ---------------------------
def entropy_rate_excess(pt: GeometryPoint, lambda_dot) -> float:
    """Entropy production in excess of beta du/dt, -lambda.g.lambda_dot."""
    return -float(pt.lam @ pt.g @ as_vector(lambda_dot, "lambda_dot"))
