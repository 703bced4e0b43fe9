"""Schroedinger-type evolution of the consistency field.

Explicit finite-difference cross-check of the transfer operator in the
curvature-free cases (one coordinate, or a constant metric).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .const import (
    DEFAULT_DECAY_END,
    DEFAULT_DECAY_START,
    DEFAULT_DT_PDE,
    DEFAULT_N_SUB_LIST,
    DEFAULT_W_REV,
    DEFAULT_WIDTH,
)
from .diagnostics import Report
from .exceptions import InvalidParameterError, StabilityViolationError, UnsupportedCurvatureError
from .geometry import GeometryProvider
from .helper import as_vector, warn_once
from .transfer import ConsistencyField, GridSpec, build_transfer, propagate, steady_state

_LOGGER = logging.getLogger(__name__)

CONSTANT_METRIC_RTOL = 1e-9
MIN_EMPIRICAL_ORDER = 0.95
DECAY_RTOL = 0.02
CLIP_WARN = 1e-12


# ---------------------------
#   PdeCoefficients
# ---------------------------
@dataclass(frozen=True)
class PdeCoefficients:
    """Graham coefficients on the nodes of ``grid`` (flat node order)."""

    grid: GridSpec
    Q: np.ndarray
    Kdrift: np.ndarray
    V: np.ndarray
    R_scalar: np.ndarray
    note: str = ""

    def __post_init__(self) -> None:
        size, m = self.grid.size, self.grid.dim
        if self.Q.shape != (size, m, m) or self.Kdrift.shape != (size, m) or self.V.shape != (size,):
            raise InvalidParameterError("coefficient fields do not match the grid")


def _gradient(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    arr = values.reshape(grid.shape)
    return np.gradient(arr, grid.axes[axis], axis=axis, edge_order=2).ravel()


# ---------------------------
#   graham_coefficients
# ---------------------------
def graham_coefficients(provider: GeometryProvider, grid: GridSpec, w_rev: float = DEFAULT_W_REV) -> PdeCoefficients:
    """Q = g^-1, K and V from the provider's geometry on every grid node."""
    if provider.m != grid.dim:
        raise InvalidParameterError(f"provider has {provider.m} coordinates, grid has {grid.dim}")
    m, size = grid.dim, grid.size
    inv_metric = np.empty((size, m, m))
    drift = np.empty((size, m))
    sqrt_det = np.empty(size)
    potential = np.empty(size)
    for n, lam in enumerate(grid.nodes):
        pt = provider.point(lam)
        inv_metric[n] = np.linalg.inv(pt.g)
        drift[n] = pt.M
        sqrt_det[n] = math.sqrt(np.linalg.det(pt.g))
        potential[n] = w_rev * pt.il_rev_density

    if m >= 2 and not np.allclose(inv_metric, inv_metric[0], rtol=CONSTANT_METRIC_RTOL, atol=0.0):
        raise UnsupportedCurvatureError("the curvature term is only carried for one coordinate or a constant metric")

    velocity = np.einsum("nij,nj->ni", inv_metric, drift)
    kdrift = velocity.copy()
    divergence = np.zeros(size)
    for i in range(m):
        for k in range(m):
            kdrift[:, i] += 0.5 * _gradient(sqrt_det * inv_metric[:, i, k], grid, k) / sqrt_det
    for k in range(m):
        divergence += _gradient(sqrt_det * velocity[:, k], grid, k)
    # -phi/2 + M g^-1 M / 2 at unit weight
    v = 0.5 * divergence / sqrt_det - 0.5 * potential
    _LOGGER.debug("graham coefficients on %d nodes, max |V| %.3g", size, np.max(np.abs(v)))
    return PdeCoefficients(
        grid=grid,
        Q=inv_metric,
        Kdrift=kdrift,
        V=v,
        R_scalar=np.zeros(size),
        note="curvature term dropped (one coordinate or constant metric)",
    )


def _d1(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    src, dst = np.moveaxis(f, axis, 0), np.moveaxis(out, axis, 0)
    dst[1:-1] = (src[2:] - src[:-2]) / (2.0 * h)
    return out


def _d2(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    src, dst = np.moveaxis(f, axis, 0), np.moveaxis(out, axis, 0)
    dst[1:-1] = (src[2:] - 2.0 * src[1:-1] + src[:-2]) / (h * h)
    return out


def stable_step(coeffs: PdeCoefficients, delta_t: float) -> float:
    """Largest explicit step, h^2 Delta_t / (2 max Q) summed over directions."""
    spacing = coeffs.grid.spacing
    stiffness = np.max(sum(coeffs.Q[:, i, i] / spacing[i] ** 2 for i in range(coeffs.grid.dim)))
    return float(delta_t / (2.0 * stiffness))


# ---------------------------
#   evolve_pde
# ---------------------------
def evolve_pde(coeffs: PdeCoefficients, psi0: ConsistencyField, T: float, dt_pde: float = DEFAULT_DT_PDE, delta_t: float = 1.0) -> ConsistencyField:
    """Explicit Euler for psi_t = (1/2Dt) d_i d_j (Q_ij psi) - d_k (K_k psi) + Dt V psi, psi = 0 on the boundary."""
    grid = coeffs.grid
    if psi0.grid != grid:
        raise InvalidParameterError("initial field and coefficients live on different grids")
    if not (T >= 0.0 and dt_pde > 0.0 and delta_t > 0.0):
        raise InvalidParameterError("T must be non-negative, dt_pde and delta_t positive")
    limit = stable_step(coeffs, delta_t)
    if dt_pde > limit:
        raise StabilityViolationError(f"dt_pde = {dt_pde:g} exceeds the explicit stability bound {limit:.4g}", suggested=limit)

    steps = int(math.ceil(T / dt_pde - 1e-9))
    if steps == 0:
        return psi0
    dt = T / steps
    shape, m, h = grid.shape, grid.dim, grid.spacing
    diffusion = [[coeffs.Q[:, i, j].reshape(shape) for j in range(m)] for i in range(m)]
    kdrift = [coeffs.Kdrift[:, k].reshape(shape) for k in range(m)]
    growth = delta_t * coeffs.V.reshape(shape)
    interior = ~grid.boundary_mask.reshape(shape)

    psi = np.where(interior, psi0.as_array(), 0.0)
    clipped = 0.0
    for _ in range(steps):
        rhs = growth * psi
        for i in range(m):
            rhs += _d2(diffusion[i][i] * psi, i, h[i]) / (2.0 * delta_t)
            for j in range(m):
                if j != i:
                    rhs += _d1(_d1(diffusion[i][j] * psi, i, h[i]), j, h[j]) / (2.0 * delta_t)
            rhs -= _d1(kdrift[i] * psi, i, h[i])
        psi = np.where(interior, psi + dt * rhs, 0.0)
        low = float(psi.min())
        if low < 0.0:
            clipped = max(clipped, -low)
            psi = np.maximum(psi, 0.0)
    if clipped > CLIP_WARN * max(float(psi.max()), 1.0):
        warn_once(("pde_clip", grid, dt), "explicit step produced negative values down to %.3g; clipped to zero", -clipped)
    _LOGGER.debug("pde evolved %d steps of %.3g to T=%g", steps, dt, T)
    return ConsistencyField(grid, psi.ravel())


def _l1_gap(a: ConsistencyField, b: ConsistencyField) -> float:
    return float(a.grid.weights @ np.abs(a.values - b.values))


# ---------------------------
#   pde_check
# ---------------------------
def pde_check(
    provider: GeometryProvider,
    grid: GridSpec,
    delta_t: float,
    initial,
    width: float = DEFAULT_WIDTH,
    n_sub_list=DEFAULT_N_SUB_LIST,
    dt_pde: float = DEFAULT_DT_PDE,
    decay_start: float = DEFAULT_DECAY_START,
    decay_end: float = DEFAULT_DECAY_END,
    w_rev: float = DEFAULT_W_REV,
) -> Report:
    """Transfer propagation against the finite-difference evolution over one window."""
    n_sub_list = sorted(int(n) for n in n_sub_list)
    if len(n_sub_list) < 2:
        raise InvalidParameterError("at least two sub-step counts are needed for an empirical order")
    if not 0.0 <= decay_start < decay_end:
        raise InvalidParameterError("decay window must satisfy 0 <= start < end")
    mean = as_vector(initial, "initial")
    psi0 = ConsistencyField.gaussian(grid, mean, np.eye(grid.dim) * width**2)
    coeffs = graham_coefficients(provider, grid, w_rev)
    report = Report("pde_check")

    reference = evolve_pde(coeffs, psi0, delta_t, dt_pde, delta_t)
    gaps = []
    for n_sub in n_sub_list:
        op = build_transfer(provider, grid, delta_t, n_sub, w_rev)
        gap = _l1_gap(propagate(op, psi0, 1), reference)
        gaps.append(gap)
        report.add(f"l1_gap[n_sub={n_sub}]", gap, note=f"sub-step {delta_t / n_sub:.4g}")
    for (n_a, gap_a), (n_b, gap_b) in zip(zip(n_sub_list, gaps), zip(n_sub_list[1:], gaps[1:])):
        order = math.log(gap_a / gap_b) / math.log(n_b / n_a) if gap_a > 0.0 and gap_b > 0.0 else math.nan
        report.add(
            f"empirical_order[{n_a}->{n_b}]",
            order,
            1.0,
            passed=bool(order >= MIN_EMPIRICAL_ORDER),
            note=f"first order; >= {MIN_EMPIRICAL_ORDER} allows the second-order terms of the backward-point rule",
        )

    early = evolve_pde(coeffs, psi0, decay_start, dt_pde, delta_t)
    late = evolve_pde(coeffs, early, decay_end - decay_start, dt_pde, delta_t)
    pde_rate = math.log(early.l1_norm / late.l1_norm) / (decay_end - decay_start)
    eigenvalue, _, _ = steady_state(build_transfer(provider, grid, delta_t, n_sub_list[-1], w_rev))
    transfer_rate = -math.log(eigenvalue) / delta_t
    report.add("pde_decay_rate", pde_rate, transfer_rate, passed=bool(abs(pde_rate - transfer_rate) <= DECAY_RTOL * abs(transfer_rate)))
    report.add("transfer_decay_rate", transfer_rate, pde_rate, note=f"n_sub={n_sub_list[-1]}")
    return report
