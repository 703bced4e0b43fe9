"""Time-transfer operator on consistency distributions.

A consistency field psi lives on a rectangular grid of manifold coordinates.
One averaging window Delta_t is split into ``n_sub`` sub-steps of length
dt; each sub-step applies the Gaussian kernel

    N(k) exp[-(Delta_t / 2 dt) d^T g(k) d - w_rev (Delta_t dt / 2) IL(k)]

with ``d = l - k - dt g^-1 M(k)`` and all geometry evaluated at the backward
node ``k``. ``n_sub = 1`` is the single-window operator. Quadrature weights
are folded in at application time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .const import (
    CONTRACTION_TOL,
    DEFAULT_CONFINEMENT,
    DEFAULT_SPECTRUM,
    DEFAULT_STEADY_MAX_ITER,
    DEFAULT_STEADY_TOLERANCE,
    DEFAULT_W_REV,
    MIN_GRID_POINTS,
    MIN_TRIALS,
    TAIL_CENTRAL_FRACTION,
    TAIL_MASS_WARN,
)
from .diagnostics import Report
from .exceptions import (
    GridMismatchError,
    InvalidParameterError,
    NonConvergenceError,
    ProviderInconsistencyError,
    SteadyStateNotConvergedError,
)
from .geometry import GeometryProvider
from .helper import as_vector, parabolic_offset, warn_once

_LOGGER = logging.getLogger(__name__)


# ---------------------------
#   GridSpec
# ---------------------------
@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid in one or two manifold dimensions."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        points = tuple(int(v) for v in np.atleast_1d(self.points))
        if not (len(lower) == len(upper) == len(points)):
            raise InvalidParameterError("grid bounds and point counts differ in dimension")
        if len(lower) not in (1, 2):
            raise InvalidParameterError(f"only 1-D and 2-D grids are supported, got {len(lower)}")
        for lo, hi, n in zip(lower, upper, points):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InvalidParameterError(f"grid bounds must be finite with lower < upper, got [{lo}, {hi}]")
            if n < MIN_GRID_POINTS:
                raise InvalidParameterError(f"grid needs at least {MIN_GRID_POINTS} points per dimension, got {n}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "points", points)

    @classmethod
    def from_spacing(cls, lower, upper, spacing) -> GridSpec:
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        spacing = np.broadcast_to(np.asarray(spacing, dtype=float), lower.shape)
        points = np.rint((upper - lower) / spacing).astype(int) + 1
        return cls(tuple(lower), tuple(upper), tuple(points))

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for lo, hi, n in zip(self.lower, self.upper, self.points)])

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.points)]

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=-1)

    @property
    def weights(self) -> np.ndarray:
        """Product trapezoid weights."""
        per_axis = []
        for h, n in zip(self.spacing, self.points):
            w = np.full(n, h)
            w[0] = w[-1] = 0.5 * h
            per_axis.append(w)
        mesh = np.meshgrid(*per_axis, indexing="ij")
        return np.prod(np.stack([c.ravel() for c in mesh]), axis=0)

    def _axis_indices(self) -> list[np.ndarray]:
        mesh = np.meshgrid(*(np.arange(n) for n in self.points), indexing="ij")
        return [c.ravel() for c in mesh]

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for idx, n in zip(self._axis_indices(), self.points):
            mask |= (idx == 0) | (idx == n - 1)
        return mask

    def central_mask(self, fraction: float) -> np.ndarray:
        """Nodes inside the central ``fraction`` of every axis."""
        mask = np.ones(self.size, dtype=bool)
        nodes = self.nodes
        for d, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            centre, half = 0.5 * (lo + hi), 0.5 * fraction * (hi - lo)
            mask &= np.abs(nodes[:, d] - centre) <= half + 1e-12 * (hi - lo)
        return mask

    def nearest(self, point) -> int:
        point = as_vector(point, "point")
        if point.size != self.dim:
            raise InvalidParameterError(f"point has {point.size} coordinates, grid has {self.dim}")
        idx = [int(np.clip(np.rint((p - lo) / h), 0, n - 1)) for p, lo, h, n in zip(point, self.lower, self.spacing, self.points)]
        return int(np.ravel_multi_index(idx, self.points))


# ---------------------------
#   ConsistencyField
# ---------------------------
@dataclass(frozen=True)
class ConsistencyField:
    """Non-negative field over a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != self.grid.size:
            raise GridMismatchError(f"field has {values.size} values, grid has {self.grid.size} nodes")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("field values must be finite")
        if np.any(values < 0.0):
            raise InvalidParameterError("field values must be non-negative")
        object.__setattr__(self, "values", values)

    # ---------------------------
    #   constructors
    # ---------------------------
    @classmethod
    def delta(cls, grid: GridSpec, point) -> ConsistencyField:
        """Unit-mass spike at the node nearest ``point``."""
        index = grid.nearest(point)
        values = np.zeros(grid.size)
        values[index] = 1.0 / grid.weights[index]
        node = grid.nodes[index]
        if not np.allclose(node, as_vector(point), atol=1e-9):
            _LOGGER.debug("delta at %s snapped to node %s", point, node)
        return cls(grid, values)

    @classmethod
    def gaussian(cls, grid: GridSpec, mean, cov) -> ConsistencyField:
        mean = as_vector(mean, "mean")
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        dev = grid.nodes - mean
        values = np.exp(-0.5 * np.einsum("ni,ij,nj->n", dev, np.linalg.inv(cov), dev))
        return cls(grid, values).normalized()

    @classmethod
    def uniform(cls, grid: GridSpec) -> ConsistencyField:
        return cls(grid, np.ones(grid.size)).normalized()

    @property
    def l1_norm(self) -> float:
        return float(self.grid.weights @ self.values)

    def normalized(self) -> ConsistencyField:
        norm = self.l1_norm
        if norm <= 0.0:
            raise InvalidParameterError("cannot normalise a field of zero mass")
        return ConsistencyField(self.grid, self.values / norm)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    # ---------------------------
    #   argmax
    # ---------------------------
    def argmax(self) -> np.ndarray:
        """Location of the maximum, refined by a parabola through log values."""
        arr = self.as_array()
        idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
        location = np.array([ax[i] for ax, i in zip(self.grid.axes, idx)])
        for d, h in enumerate(self.grid.spacing):
            i = idx[d]
            if i == 0 or i == arr.shape[d] - 1:
                continue
            lo, hi = list(idx), list(idx)
            lo[d], hi[d] = i - 1, i + 1
            trio = np.array([arr[tuple(lo)], arr[idx], arr[tuple(hi)]])
            if np.all(trio > 0.0):
                location[d] += h * parabolic_offset(*np.log(trio))
        return location

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the normalised field."""
        w = self.grid.weights * self.values
        w = w / w.sum()
        nodes = self.grid.nodes
        mean = w @ nodes
        dev = nodes - mean
        return mean, (dev * w[:, None]).T @ dev


# ---------------------------
#   TransferOperator
# ---------------------------
@dataclass(frozen=True)
class TransferOperator:
    """Dense sub-step kernel with its grid and time parameters."""

    grid: GridSpec
    kernel: np.ndarray
    delta_t: float
    n_sub: int
    w_rev: float = DEFAULT_W_REV
    il_rev: np.ndarray = field(default=None, repr=False)
    metric_det: np.ndarray = field(default=None, repr=False)
    drift: np.ndarray = field(default=None, repr=False)

    @property
    def sub_step(self) -> float:
        return self.delta_t / self.n_sub

    def apply(self, values: np.ndarray) -> np.ndarray:
        """One full Delta_t window applied to raw node values."""
        weights = self.grid.weights
        out = np.asarray(values, dtype=float)
        for _ in range(self.n_sub):
            out = self.kernel @ (weights * out)
        return out

    def matrix(self) -> np.ndarray:
        """Full one-window matrix acting on node values."""
        return np.linalg.matrix_power(self.kernel * self.grid.weights[None, :], self.n_sub)

    def rate(self, eigenvalue: float) -> float:
        """Eigenvalue per unit time."""
        return float(eigenvalue ** (1.0 / self.delta_t))

    # ---------------------------
    #   confinement
    # ---------------------------
    def confinement(self, factor: float = DEFAULT_CONFINEMENT) -> tuple[bool, float, float]:
        """Whether IL_rev on the grid boundary exceeds ``factor`` times its median."""
        boundary = float(self.il_rev[self.grid.boundary_mask].min())
        median = float(np.median(self.il_rev))
        return bool(boundary > 0.0 and boundary > factor * median), boundary, median


# ---------------------------
#   build_transfer
# ---------------------------
def build_transfer(provider: GeometryProvider, grid: GridSpec, delta_t: float, n_sub: int, w_rev: float = DEFAULT_W_REV) -> TransferOperator:
    """Assemble the sub-step kernel from the provider's geometry on every node."""
    if provider.m != grid.dim:
        raise GridMismatchError(f"provider has {provider.m} coordinates, grid has {grid.dim}")
    if n_sub < 1:
        raise InvalidParameterError(f"n_sub must be at least 1, got {n_sub}")
    if not delta_t > 0.0:
        raise InvalidParameterError(f"delta_t must be positive, got {delta_t}")
    if not w_rev >= 0.0:
        raise InvalidParameterError(f"w_rev must be non-negative, got {w_rev}")

    nodes = grid.nodes
    m = grid.dim
    size = grid.size
    metric = np.empty((size, m, m))
    drift = np.empty((size, m))
    il_density = np.empty(size)
    for n, lam in enumerate(nodes):
        pt = provider.point(lam)
        metric[n] = pt.g
        drift[n] = pt.reversible_velocity
        il_density[n] = pt.il_rev_density
        if pt.il_rev_density < 0.0 and "il_rev_nonnegative" in pt.invariant_violations():
            raise ProviderInconsistencyError(f"IL_rev = {pt.il_rev_density:.3e} < 0 at node {lam}")
    il_density = np.maximum(il_density, 0.0)

    dt = delta_t / n_sub
    log_det = np.linalg.slogdet(metric)[1]
    disp = nodes[:, None, :] - nodes[None, :, :] - dt * drift[None, :, :]
    quad = np.einsum("oim,imn,oin->oi", disp, metric, disp)
    log_norm = 0.5 * m * np.log(delta_t / (2.0 * np.pi * dt)) + 0.5 * log_det
    exponent = log_norm[None, :] - (delta_t / (2.0 * dt)) * quad - w_rev * (0.5 * delta_t * dt) * il_density[None, :]
    kernel = np.maximum(np.exp(exponent), np.finfo(float).tiny)

    _LOGGER.debug("transfer kernel on %d nodes, n_sub=%d, dt=%.4g", size, n_sub, dt)
    return TransferOperator(
        grid=grid,
        kernel=kernel,
        delta_t=float(delta_t),
        n_sub=int(n_sub),
        w_rev=float(w_rev),
        il_rev=0.5 * delta_t**2 * il_density,
        metric_det=np.exp(log_det),
        drift=drift,
    )


def _check_grid(op: TransferOperator, psi: ConsistencyField) -> None:
    if psi.grid != op.grid:
        raise GridMismatchError("field and operator grids differ")


# ---------------------------
#   propagate
# ---------------------------
def propagate(op: TransferOperator, psi0: ConsistencyField, steps: int) -> ConsistencyField:
    """Apply the operator ``steps`` times."""
    return trajectory(op, psi0, steps)[-1]


def trajectory(op: TransferOperator, psi0: ConsistencyField, steps: int) -> list[ConsistencyField]:
    """Fields after 0, 1, ..., ``steps`` windows (raw, not renormalised)."""
    _check_grid(op, psi0)
    if steps < 0:
        raise InvalidParameterError("steps must be non-negative")
    fields = [psi0]
    values = psi0.values
    for _ in range(steps):
        values = np.maximum(op.apply(values), 0.0)
        fields.append(ConsistencyField(op.grid, values))
    return fields


# ---------------------------
#   steady_state
# ---------------------------
def steady_state(
    op: TransferOperator,
    tol: float = DEFAULT_STEADY_TOLERANCE,
    max_iter: int = DEFAULT_STEADY_MAX_ITER,
    seed: int = 0,
    confinement_factor: float = DEFAULT_CONFINEMENT,
) -> tuple[float, ConsistencyField, int]:
    """Power iteration with unit-L1 renormalisation from a positive random start."""
    if not tol > 0.0:
        raise InvalidParameterError("tol must be positive")
    confined, boundary, median = op.confinement(confinement_factor)
    if not confined:
        warn_once(
            ("confinement", op.grid, op.delta_t),
            "IL_rev does not confine on this grid (boundary %.3g vs median %.3g); the steady state is set by the grid edge",
            boundary,
            median,
        )

    weights = op.grid.weights
    rng = np.random.default_rng(seed)
    current = rng.uniform(0.5, 1.5, op.grid.size)
    current /= weights @ current
    eigenvalue, gap = np.nan, np.inf
    for iteration in range(1, max_iter + 1):
        nxt = np.maximum(op.apply(current), 0.0)
        eigenvalue = float(weights @ nxt)
        if not (np.isfinite(eigenvalue) and eigenvalue > 0.0):
            raise NonConvergenceError(f"power iteration lost all mass (ratio {eigenvalue})")
        nxt /= eigenvalue
        gap = float(weights @ np.abs(nxt - current))
        current = nxt
        _LOGGER.debug("power iteration %d: ratio %.12g gap %.3e", iteration, eigenvalue, gap)
        if gap < tol:
            _LOGGER.info("steady state after %d iterations, eigenvalue %.9g", iteration, eigenvalue)
            return eigenvalue, ConsistencyField(op.grid, current), iteration

    raise SteadyStateNotConvergedError(
        f"power iteration did not converge in {max_iter} iterations (gap {gap:.3e})",
        gap=gap,
        field=ConsistencyField(op.grid, current),
        eigenvalue=eigenvalue,
    )


def _power(mat: np.ndarray, start: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray, bool]:
    x = start / np.linalg.norm(start)
    value = 0.0
    for _ in range(max_iter):
        y = mat @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0, x, True
        new_value = float(x @ y)
        x = y / norm
        if abs(new_value - value) <= tol * abs(new_value):
            return new_value, x, True
        value = new_value
    return value, x, False


# ---------------------------
#   spectrum
# ---------------------------
def spectrum(op: TransferOperator, count: int = DEFAULT_SPECTRUM, tol: float = 1e-12, max_iter: int = 5000) -> np.ndarray:
    """Leading eigenvalue magnitudes of the one-window matrix by repeated deflation.

    Each eigenpair is removed with its left eigenvector, B <- B - s x y^T / (y^T x),
    which keeps the remaining spectrum of a non-symmetric matrix intact.
    """
    mat = op.matrix()
    rng = np.random.default_rng(0)
    found = []
    for k in range(count):
        start = rng.uniform(0.5, 1.5, mat.shape[0])
        value, right, ok_right = _power(mat, start, tol, max_iter)
        _, left, ok_left = _power(mat.T, start, tol, max_iter)
        if not (ok_right and ok_left):
            _LOGGER.warning("deflation stopped after %d eigenvalues (power iteration did not settle)", k)
            break
        found.append(abs(value))
        overlap = left @ right
        if overlap == 0.0:
            break
        mat = mat - value * np.outer(right, left) / overlap
    return np.array(found)


# ---------------------------
#   appendix_b_diagnostics
# ---------------------------
def appendix_b_diagnostics(
    op: TransferOperator,
    trials: int,
    seed: int,
    confinement_factor: float = DEFAULT_CONFINEMENT,
) -> Report:
    """Numerical counterparts of the boundedness, compactness and positivity properties."""
    if trials < MIN_TRIALS:
        raise InvalidParameterError(f"at least {MIN_TRIALS} trials are required, got {trials}")
    grid = op.grid
    weights = grid.weights
    report = Report("appendix_b")
    rng = np.random.default_rng(seed)

    worst, smallest = 0.0, np.inf
    for _ in range(trials):
        psi = rng.uniform(0.0, 1.0, grid.size)
        psi /= weights @ psi
        image = op.apply(psi)
        worst = max(worst, float(weights @ image))
        smallest = min(smallest, float(image.min()))
    report.add("l1_contraction", worst, 1.0, passed=worst <= 1.0 + CONTRACTION_TOL)
    report.add("strict_positivity", smallest, 0.0, passed=smallest > 0.0)

    centre = ConsistencyField.delta(grid, 0.5 * (np.array(grid.lower) + np.array(grid.upper)))
    image = op.apply(centre.values)
    mass = float(weights @ image)
    outside = ~grid.central_mask(TAIL_CENTRAL_FRACTION)
    tail = float(weights[outside] @ image[outside]) / mass
    report.add("tail_mass", tail, TAIL_MASS_WARN, warning=tail > TAIL_MASS_WARN, note="grid too small" if tail > TAIL_MASS_WARN else "")

    arr = image.reshape(grid.shape)
    modulus = 0.0
    for d in range(grid.dim):
        shifted = np.diff(arr, axis=d)
        cut = [slice(None)] * grid.dim
        cut[d] = slice(1, None)
        modulus = max(modulus, float(weights.reshape(grid.shape)[tuple(cut)].ravel() @ np.abs(shifted).ravel()) / mass)
    report.add("translation_modulus", modulus, 0.0, note="one-node shift")

    confined, boundary, median = op.confinement(confinement_factor)
    report.add("confinement", boundary, confinement_factor * median, warning=not confined, note="" if confined else "IL_rev does not grow toward the grid boundary")

    det_min = float(op.metric_det.min())
    report.add("metric_lower_bound", det_min, 0.0, passed=det_min > 0.0)
    drift_max = float(np.abs(op.drift).max())
    report.add("reversible_drift_bound", drift_max, 0.0, passed=bool(np.isfinite(drift_max)))

    for name in report.warnings:
        _LOGGER.warning("appendix_b: %s flagged (%s)", name, report[name].note)
    return report
