"""Extremal paths and the classical closure.

The Euler-Lagrange equations of the information-loss Lagrangian take the
forced-geodesic form

    lambda_dd + Gamma[v, v] = g^-1 (Omega v + 1/2 grad U),

with Christoffel symbols of g, the curl Omega_ik = d_k M_i - d_i M_k and the
potential U = w_rev (phi - M g^-1 M) + M g^-1 M. Geometry derivatives come
from central differences of the provider so Monte Carlo and tabulated
providers work unchanged.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .const import (
    DEFAULT_EL_TOLERANCE,
    DEFAULT_NEWTON_MAX_ITER,
    DEFAULT_WORKERS,
    FD_STEP_GEOMETRY,
    FD_STEP_NEWTON,
    MIN_N_NODES,
)
from .exceptions import (
    ClosureBoundaryError,
    DegenerateGeometryError,
    GeometryOutOfRangeError,
    InvalidParameterError,
    NonConvergenceError,
    SingularCollocationError,
)
from .helper import as_vector, parabolic_offset, rk4_step
from .lagrangian import LagrangianContext, Path, discrete_action
from .transfer import GridSpec

_LOGGER = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
MAX_HALVINGS = 30


# ---------------------------
#   BvpSolution
# ---------------------------
@dataclass(frozen=True)
class BvpSolution:
    """Discrete extremal with its convergence audit."""

    path: Path
    el_residual: float
    converged: bool
    iterations: int
    newton_residual: float = np.nan


# ---------------------------
#   ClosureResult
# ---------------------------
@dataclass(frozen=True)
class ClosureResult:
    """Minimiser of the extremal action over an endpoint grid."""

    lam_opt: np.ndarray
    table: np.ndarray
    grid: GridSpec
    invalid: int = 0

    def __iter__(self):
        return iter((self.lam_opt, self.table))


# ---------------------------
#   NodeTerms
# ---------------------------
@dataclass(frozen=True)
class NodeTerms:
    """Force terms at one node: N(v) = Gamma[v, v] - curl v - force."""

    christoffel: np.ndarray
    curl: np.ndarray
    force: np.ndarray

    def evaluate(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("ljk,j,k->l", self.christoffel, v, v) - self.curl @ v - self.force

    def velocity_jacobian(self, v: np.ndarray) -> np.ndarray:
        return 2.0 * np.einsum("ljk,k->lj", self.christoffel, v) - self.curl


# ---------------------------
#   node_terms
# ---------------------------
def node_terms(ctx: LagrangianContext, lam: np.ndarray, step: float = FD_STEP_GEOMETRY) -> NodeTerms:
    """Christoffel symbols, reduced curl and potential force by central differences."""
    m = ctx.m
    centre = ctx.geometry(lam)
    g_inv = np.linalg.inv(centre.g)
    d_metric = np.empty((m, m, m))
    d_drift = np.empty((m, m))
    d_potential = np.empty(m)
    for k in range(m):
        shift = np.zeros(m)
        shift[k] = step
        plus, minus = ctx.geometry(lam + shift), ctx.geometry(lam - shift)
        d_metric[k] = (plus.g - minus.g) / (2.0 * step)
        d_drift[:, k] = (plus.M - minus.M) / (2.0 * step)
        d_potential[k] = (ctx.potential(plus) - ctx.potential(minus)) / (2.0 * step)

    first_kind = 0.5 * (np.transpose(d_metric, (1, 0, 2)) + np.transpose(d_metric, (1, 2, 0)) - d_metric)
    christoffel = np.einsum("li,ijk->ljk", g_inv, first_kind)
    curl = d_drift - d_drift.T
    return NodeTerms(christoffel, g_inv @ curl, 0.5 * g_inv @ d_potential)


def _terms(ctx: LagrangianContext, nodes: np.ndarray) -> list[NodeTerms]:
    return [node_terms(ctx, lam) for lam in nodes]


def _residual(points: np.ndarray, dt: float, terms: list[NodeTerms]) -> np.ndarray:
    accel = (points[2:] - 2.0 * points[1:-1] + points[:-2]) / dt**2
    vel = (points[2:] - points[:-2]) / (2.0 * dt)
    return accel + np.array([t.evaluate(v) for t, v in zip(terms, vel)])


def _jacobian(ctx: LagrangianContext, points: np.ndarray, dt: float, terms: list[NodeTerms]) -> sparse.csr_matrix:
    """Block-tridiagonal collocation Jacobian over the interior nodes."""
    m = points.shape[1]
    n_int = points.shape[0] - 2
    eye = np.eye(m)
    vel = (points[2:] - points[:-2]) / (2.0 * dt)

    diag = np.empty((n_int, m, m))
    off = np.empty((n_int, m, m))
    for r in range(n_int):
        lam = points[r + 1]
        off[r] = terms[r].velocity_jacobian(vel[r]) / (2.0 * dt)
        cols = []
        for d in range(m):
            shift = np.zeros(m)
            shift[d] = FD_STEP_NEWTON
            up = node_terms(ctx, lam + shift).evaluate(vel[r])
            down = node_terms(ctx, lam - shift).evaluate(vel[r])
            cols.append((up - down) / (2.0 * FD_STEP_NEWTON))
        diag[r] = -2.0 * eye / dt**2 + np.stack(cols, axis=-1)

    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    rows, cols, data = [], [], []
    for r in range(n_int):
        rows.append(r * m + ii.ravel())
        cols.append(r * m + jj.ravel())
        data.append(diag[r].ravel())
        if r > 0:
            rows.append(r * m + ii.ravel())
            cols.append((r - 1) * m + jj.ravel())
            data.append((eye / dt**2 - off[r]).ravel())
        if r < n_int - 1:
            rows.append(r * m + ii.ravel())
            cols.append((r + 1) * m + jj.ravel())
            data.append((eye / dt**2 + off[r]).ravel())
    size = n_int * m
    return sparse.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)).tocsr()


# ---------------------------
#   el_audit
# ---------------------------
def el_audit(points: np.ndarray, dt: float, terms: list[NodeTerms]) -> float:
    """Euler-Lagrange residual of a discrete path with fourth-order stencils."""
    if points.shape[0] < 5:
        return np.inf
    x = points
    vel = (-x[4:] + 8.0 * x[3:-1] - 8.0 * x[1:-3] + x[:-4]) / (12.0 * dt)
    accel = (-x[4:] + 16.0 * x[3:-1] - 30.0 * x[2:-2] + 16.0 * x[1:-3] - x[:-4]) / (12.0 * dt**2)
    inner = terms[1:-1]
    resid = accel + np.array([t.evaluate(v) for t, v in zip(inner, vel)])
    return float(np.max(np.abs(resid)))


# ---------------------------
#   solve_extremal
# ---------------------------
def solve_extremal(
    ctx: LagrangianContext,
    lam0,
    lamT,
    T: float,
    n_nodes: int,
    el_tolerance: float = DEFAULT_EL_TOLERANCE,
    max_iter: int = DEFAULT_NEWTON_MAX_ITER,
) -> BvpSolution:
    """Damped Newton on the collocation system, started from the straight line."""
    lam0 = as_vector(lam0, "lambda0")
    lamT = as_vector(lamT, "lambdaT")
    if lam0.size != ctx.m or lamT.size != ctx.m:
        raise InvalidParameterError(f"endpoints must have {ctx.m} coordinates")
    if not T > 0.0:
        raise InvalidParameterError(f"T must be positive, got {T}")
    if n_nodes < MIN_N_NODES:
        raise InvalidParameterError(f"n_nodes must be at least {MIN_N_NODES}, got {n_nodes}")

    times = np.linspace(0.0, T, n_nodes)
    dt = times[1] - times[0]
    points = lam0 + np.outer(times / T, lamT - lam0)

    terms = _terms(ctx, points[1:-1])
    resid = _residual(points, dt, terms)
    merit = float(np.max(np.abs(resid))) * dt**2
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        if merit <= NEWTON_TOL * (1.0 + float(np.max(np.abs(points)))):
            converged = True
            iteration -= 1
            break
        jac = _jacobian(ctx, points, dt, terms)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            delta = spsolve(jac, -resid.ravel())
        if not np.all(np.isfinite(delta)):
            raise SingularCollocationError(f"collocation Jacobian is singular with {n_nodes} nodes; try a finer n_nodes")
        delta = delta.reshape(-1, ctx.m)

        alpha = 1.0
        for _ in range(MAX_HALVINGS):
            trial = points.copy()
            trial[1:-1] += alpha * delta
            trial_terms = _terms(ctx, trial[1:-1])
            trial_resid = _residual(trial, dt, trial_terms)
            trial_merit = float(np.max(np.abs(trial_resid))) * dt**2
            if trial_merit < merit:
                break
            alpha *= 0.5
        else:
            _LOGGER.debug("line search failed at iteration %d (merit %.3e)", iteration, merit)
            break

        points, terms, resid, merit = trial, trial_terms, trial_resid, trial_merit
        _LOGGER.debug("newton %d: damping %.3g merit %.3e", iteration, alpha, merit)
        if alpha * float(np.max(np.abs(delta))) <= 1e-14 * (1.0 + float(np.max(np.abs(points)))):
            converged = True
            break
    else:
        converged = merit <= NEWTON_TOL * (1.0 + float(np.max(np.abs(points))))

    audit = el_audit(points, dt, terms)
    ok = converged and audit < el_tolerance
    if not ok:
        _LOGGER.warning("extremal not converged (newton %s, audit %.3e, tolerance %.1e)", converged, audit, el_tolerance)
    return BvpSolution(Path(times, points), audit, ok, iteration, merit)


def _cell_action(ctx: LagrangianContext, lam0: np.ndarray, lamT: np.ndarray, T: float, n_nodes: int, el_tolerance: float) -> float:
    try:
        sol = solve_extremal(ctx, lam0, lamT, T, n_nodes, el_tolerance=el_tolerance)
    except (SingularCollocationError, DegenerateGeometryError, GeometryOutOfRangeError) as err:
        _LOGGER.debug("endpoint %s invalid: %s", lamT, err)
        return np.nan
    if not sol.converged:
        return np.nan
    return discrete_action(ctx, sol.path)


# ---------------------------
#   classical_closure
# ---------------------------
def classical_closure(
    ctx: LagrangianContext,
    lam0,
    T: float,
    endpoint_grid: GridSpec,
    n_nodes: int = 200,
    el_tolerance: float = DEFAULT_EL_TOLERANCE,
    workers: int = DEFAULT_WORKERS,
) -> ClosureResult:
    """Minimise the extremal action over the endpoint grid.

    Ties (within 1e-12 relative) go to the endpoint of smallest norm.
    """
    lam0 = as_vector(lam0, "lambda0")
    if endpoint_grid.dim != ctx.m:
        raise InvalidParameterError(f"endpoint grid has {endpoint_grid.dim} dimensions, geometry has {ctx.m}")
    ends = endpoint_grid.nodes

    def _one(end):
        return _cell_action(ctx, lam0, end, T, n_nodes, el_tolerance)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.array(list(pool.map(_one, ends)))
    else:
        values = np.array([_one(end) for end in ends])

    invalid = int(np.sum(~np.isfinite(values)))
    table = values.reshape(endpoint_grid.shape)
    if invalid == values.size:
        raise NonConvergenceError("no endpoint of the closure grid produced a converged extremal")
    if invalid:
        _LOGGER.warning("%d of %d closure cells invalid", invalid, values.size)

    finite = np.where(np.isfinite(values), values, np.inf)
    best = float(finite.min())
    ties = np.flatnonzero(np.abs(finite - best) <= 1e-12 * max(1.0, abs(best)))
    flat = int(ties[np.argmin(np.linalg.norm(ends[ties], axis=1))])
    idx = np.unravel_index(flat, endpoint_grid.shape)

    lam_opt = ends[flat].copy()
    result = ClosureResult(lam_opt, table, endpoint_grid, invalid)
    if any(i == 0 or i == n - 1 for i, n in zip(idx, endpoint_grid.shape)):
        raise ClosureBoundaryError(f"closure minimum at grid boundary {lam_opt}; enlarge the endpoint grid", result=result)

    for d, h in enumerate(endpoint_grid.spacing):
        lo, hi = list(idx), list(idx)
        lo[d] -= 1
        hi[d] += 1
        trio = (table[tuple(lo)], table[idx], table[tuple(hi)])
        if all(np.isfinite(trio)):
            lam_opt[d] += h * parabolic_offset(*trio)
    _LOGGER.info("closure minimum at %s (S_m %.6g)", lam_opt, best)
    return ClosureResult(lam_opt, table, endpoint_grid, invalid)


# ---------------------------
#   reversible_trajectory
# ---------------------------
def reversible_trajectory(ctx: LagrangianContext, lam0, T: float, dt: float) -> Path:
    """RK4 integration of lambda_dot = g^-1 M."""
    lam = as_vector(lam0, "lambda0")
    steps = int(round(T / dt))
    if steps < 1:
        raise InvalidParameterError("T must span at least one step")
    points = [lam]
    for _ in range(steps):
        lam = rk4_step(lambda y: ctx.geometry(y).reversible_velocity, lam, dt)
        points.append(lam)
    return Path(np.linspace(0.0, steps * dt, steps + 1), np.array(points))
