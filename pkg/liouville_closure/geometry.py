"""Local geometry of the trial manifold.

Every Lagrangian evaluation consumes a ``GeometryPoint``: the means ``a``,
the Fisher metric ``g``, the reversible drift numerator ``M = <LA>``, the
second moments ``kmat = <LA LA^T>``, the cross moments
``h_ij = <(A_i - a_i) LA_j>`` and ``phi = lambda.kmat.lambda``.
Providers compute these by Gaussian moment algebra, by Monte Carlo, by
interpolation of a precomputed table, or from an affine surrogate.
"""

from __future__ import annotations

import itertools
import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .const import (
    CLOSED_FORM_ATOL,
    DEFAULT_BATCHES,
    DEFAULT_BETA,
    DEFAULT_LAMBDA_DOT_SCALE,
    DEGENERATE_RATIO,
    FD_STEP_GEOMETRY,
    SE_FACTOR,
)
from .diagnostics import Report
from .exceptions import (
    DegenerateGeometryError,
    GeometryOutOfRangeError,
    InvalidParameterError,
    UnsupportedModelError,
)
from .helper import as_vector, batch_standard_error, paired_mean
from .models import HamiltonianModel, sample_trial

_LOGGER = logging.getLogger(__name__)

PROVENANCE_CLOSED_FORM = "closed_form"
PROVENANCE_MONTE_CARLO = "monte_carlo"
PROVENANCE_TABULATED = "tabulated"
PROVENANCE_SURROGATE = "surrogate"

TABULATED_RTOL = 1e-2


# ---------------------------
#   TrialCoordinates
# ---------------------------
@dataclass(frozen=True)
class TrialCoordinates:
    """A point lambda on the trial manifold at inverse temperature beta."""

    lam: np.ndarray
    beta: float = DEFAULT_BETA

    def __post_init__(self) -> None:
        lam = as_vector(self.lam, "lambda")
        if not np.all(np.isfinite(lam)):
            raise InvalidParameterError("lambda must be finite")
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise InvalidParameterError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "beta", float(self.beta))


# ---------------------------
#   GeometryPoint
# ---------------------------
@dataclass(frozen=True)
class GeometryPoint:
    """Local geometric data at one manifold point."""

    lam: np.ndarray
    a: np.ndarray
    g: np.ndarray
    M: np.ndarray
    kmat: np.ndarray
    h: np.ndarray
    phi: float
    se: dict[str, np.ndarray] | None = None
    provenance: str = PROVENANCE_CLOSED_FORM
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.lam.size

    @property
    def reversible_velocity(self) -> np.ndarray:
        """g^-1 M."""
        if "v_rev" not in self._cache:
            self._cache["v_rev"] = np.linalg.solve(self.g, self.M)
        return self._cache["v_rev"]

    @property
    def m_g_m(self) -> float:
        return float(self.M @ self.reversible_velocity)

    @property
    def il_rev_density(self) -> float:
        """phi - M g^-1 M; IL_rev per (Delta t^2 / 2)."""
        return self.phi - self.m_g_m

    def _tolerance(self, key: str, scale: float) -> float:
        if self.se is not None and key in self.se:
            return SE_FACTOR * float(np.max(self.se[key])) + CLOSED_FORM_ATOL
        if self.provenance == PROVENANCE_TABULATED:
            return TABULATED_RTOL * max(1.0, scale)
        return CLOSED_FORM_ATOL * max(1.0, scale)

    # ---------------------------
    #   invariant_violations
    # ---------------------------
    def invariant_violations(self) -> list[str]:
        """Names of violated invariants (empty when all hold)."""
        violations = []
        if not np.allclose(self.g, self.g.T) or np.linalg.eigvalsh(self.g).min() <= 0.0:
            violations.append("metric_spd")
        scale = abs(self.phi)
        if self.phi < -self._tolerance("phi", scale):
            violations.append("phi_nonnegative")
        if self.il_rev_density < -self._tolerance("il_rev", scale):
            violations.append("il_rev_nonnegative")
        if abs(float(self.lam @ self.M)) > self._tolerance("lam_M", float(np.abs(self.M).max(initial=0.0))):
            violations.append("lambda_M_zero")
        return violations


def _check_metric(g: np.ndarray) -> None:
    if not np.all(np.isfinite(g)):
        raise DegenerateGeometryError("metric has non-finite entries")
    vals, vecs = np.linalg.eigh(0.5 * (g + g.T))
    top = max(abs(vals[-1]), np.finfo(float).tiny)
    if vals[0] < DEGENERATE_RATIO * top:
        direction = vecs[:, 0]
        raise DegenerateGeometryError(
            f"metric is numerically singular along direction {np.array2string(direction, precision=4)} "
            f"(eigenvalue {vals[0]:.3e} vs {top:.3e})",
            direction=direction,
        )


# ---------------------------
#   GeometryProvider
# ---------------------------
class GeometryProvider(ABC):
    """Maps trial coordinates to geometry points."""

    m: int
    beta: float = DEFAULT_BETA
    name: str = "provider"

    @abstractmethod
    def _evaluate(self, coords: TrialCoordinates) -> GeometryPoint:
        """Compute the geometry without validation."""

    def geometry_at(self, coords: TrialCoordinates) -> GeometryPoint:
        if coords.lam.size != self.m:
            raise InvalidParameterError(f"{self.name}: expected {self.m} coordinates, got {coords.lam.size}")
        point = self._evaluate(coords)
        _check_metric(point.g)
        return point

    def point(self, lam) -> GeometryPoint:
        """Geometry at ``lam`` using the provider's beta."""
        return self.geometry_at(TrialCoordinates(lam, self.beta))


# ---------------------------
#   geometry_at
# ---------------------------
def geometry_at(provider: GeometryProvider, coords: TrialCoordinates) -> GeometryPoint:
    """Validated geometry of ``provider`` at ``coords``."""
    return provider.geometry_at(coords)


def _decompose_quadratic(fn, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact split f(x) = c + L x + B(x, x) of a quadratic vector field."""
    eye = np.eye(n)
    c = np.asarray(fn(np.zeros(n)), dtype=float)
    plus = np.array([fn(eye[k]) for k in range(n)])
    minus = np.array([fn(-eye[k]) for k in range(n)])
    lin = ((plus - minus) / 2.0).T
    quad = np.empty((c.size, n, n))
    for i in range(n):
        for j in range(n):
            quad[:, i, j] = 0.5 * (np.asarray(fn(eye[i] + eye[j])) - plus[i] - plus[j] + c)
    return c, lin, quad


# ---------------------------
#   ClosedFormProvider
# ---------------------------
class ClosedFormProvider(GeometryProvider):
    """Gaussian moment oracle for linear resolved variables and quadratic flows.

    With x ~ N(mu, C) and f = c + L x + B(x, x), the Isserlis relations give
    E f = f(mu) + tr(B C), Cov f = D C D^T + 2 tr(B_i C B_j C) and
    Cov(x, f) = C D^T where D = L + 2 B(mu, .).
    """

    name = "closed_form"

    def __init__(self, model: HamiltonianModel, beta: float = DEFAULT_BETA) -> None:
        if not beta > 0.0:
            raise InvalidParameterError(f"beta must be positive, got {beta}")
        self.model = model
        self.m = model.m
        self.beta = float(beta)
        self._c, self._lin, self._quad = _decompose_quadratic(model.flow, model.n_fine)

        x = np.random.default_rng(0).standard_normal(model.n_fine)
        expected = self._c + self._lin @ x + np.einsum("iab,a,b->i", self._quad, x, x)
        actual = model.flow(x)
        if not np.allclose(expected, actual, rtol=1e-9, atol=1e-9):
            raise UnsupportedModelError(f"{model.name}: flow is not quadratic; use a Monte Carlo provider")

    def _evaluate(self, coords: TrialCoordinates) -> GeometryPoint:
        lam = coords.lam
        mu, cov = self.model.trial_moments(lam, coords.beta)
        proj = self.model.resolved_matrix
        quad = self._quad

        jac = self._lin + 2.0 * np.einsum("iab,a->ib", quad, mu)
        mean_f = self._c + self._lin @ mu + np.einsum("iab,a,b->i", quad, mu, mu) + np.einsum("iab,ab->i", quad, cov)
        quad_cov = np.einsum("iab,bc->iac", quad, cov)
        cov_f = jac @ cov @ jac.T + 2.0 * np.einsum("iac,jca->ij", quad_cov, quad_cov)
        second = np.outer(mean_f, mean_f) + cov_f

        g = proj @ cov @ proj.T
        kmat = proj @ second @ proj.T
        kmat = 0.5 * (kmat + kmat.T)
        return GeometryPoint(
            lam=lam,
            a=proj @ mu,
            g=0.5 * (g + g.T),
            M=proj @ mean_f,
            kmat=kmat,
            h=proj @ cov @ jac.T @ proj.T,
            phi=float(lam @ kmat @ lam),
            provenance=PROVENANCE_CLOSED_FORM,
        )


def _sample_statistics(lam: np.ndarray, res: np.ndarray, lres: np.ndarray) -> dict[str, np.ndarray]:
    count = res.shape[0]
    a = res.mean(axis=0)
    dev = res - a
    g = dev.T @ dev / (count - 1)
    M = lres.mean(axis=0)
    kmat = lres.T @ lres / count
    kmat = 0.5 * (kmat + kmat.T)
    phi = lam @ kmat @ lam
    return {
        "a": a,
        "g": g,
        "M": M,
        "kmat": kmat,
        "h": dev.T @ lres / count,
        "phi": np.asarray(phi),
        "il_rev": np.asarray(phi - M @ np.linalg.solve(g, M)),
        "lam_M": np.asarray(lam @ M),
    }


# ---------------------------
#   MonteCarloProvider
# ---------------------------
class MonteCarloProvider(GeometryProvider):
    """Sample-average geometry with batch-means standard errors."""

    name = "monte_carlo"

    def __init__(self, model: HamiltonianModel, count: int, seed: int, beta: float = DEFAULT_BETA, batches: int = DEFAULT_BATCHES) -> None:
        if batches < 2:
            raise InvalidParameterError("at least two batches are required for standard errors")
        if count < batches * (model.m + 2):
            raise InvalidParameterError(f"count {count} too small for {batches} batches")
        if not beta > 0.0:
            raise InvalidParameterError(f"beta must be positive, got {beta}")
        self.model = model
        self.m = model.m
        self.count = int(count)
        self.seed = int(seed)
        self.beta = float(beta)
        self.batches = int(batches)

    def _evaluate(self, coords: TrialCoordinates) -> GeometryPoint:
        lam = coords.lam
        samples = sample_trial(self.model, lam, coords.beta, self.count, self.seed)
        res = self.model.resolved(samples)
        lres = self.model.liouville(samples)

        stats = _sample_statistics(lam, res, lres)
        per_batch = [
            _sample_statistics(lam, res[idx], lres[idx])
            for idx in np.array_split(np.arange(self.count), self.batches)
        ]
        se = {key: batch_standard_error(np.array([b[key] for b in per_batch])) for key in stats}
        _LOGGER.debug("%s: geometry at %s from %d samples", self.name, lam, self.count)
        return GeometryPoint(
            lam=lam,
            a=stats["a"],
            g=0.5 * (stats["g"] + stats["g"].T),
            M=stats["M"],
            kmat=stats["kmat"],
            h=stats["h"],
            phi=float(stats["phi"]),
            se=se,
            provenance=PROVENANCE_MONTE_CARLO,
        )


# ---------------------------
#   TabulatedProvider
# ---------------------------
class TabulatedProvider(GeometryProvider):
    """Multilinear interpolation of a precomputed geometry table."""

    name = "tabulated"

    def __init__(self, base: GeometryProvider, axes: Sequence[np.ndarray]) -> None:
        axes = [np.asarray(ax, dtype=float) for ax in axes]
        if len(axes) != base.m:
            raise InvalidParameterError(f"table needs {base.m} axes, got {len(axes)}")
        self.base = base
        self.m = base.m
        self.beta = base.beta
        self.axes = axes

        m = self.m
        shape = tuple(ax.size for ax in axes)
        values = np.empty(shape + (2 * m + 3 * m * m + 1,))
        for idx in itertools.product(*(range(n) for n in shape)):
            lam = np.array([axes[d][i] for d, i in enumerate(idx)])
            pt = base.point(lam)
            values[idx] = np.concatenate([pt.a, pt.g.ravel(), pt.M, pt.kmat.ravel(), pt.h.ravel(), [pt.phi]])
        self._interp = RegularGridInterpolator(axes, values, method="linear", bounds_error=True)
        _LOGGER.debug("%s: tabulated %d nodes", self.name, int(np.prod(shape)))

    def _evaluate(self, coords: TrialCoordinates) -> GeometryPoint:
        m = self.m
        try:
            row = self._interp(coords.lam[None, :])[0]
        except ValueError as err:
            raise GeometryOutOfRangeError(f"lambda {coords.lam} lies outside the geometry table") from err
        cuts = np.cumsum([m, m * m, m, m * m, m * m])
        a, g, M, kmat, h, phi = np.split(row, cuts)
        g = g.reshape(m, m)
        kmat = kmat.reshape(m, m)
        return GeometryPoint(
            lam=coords.lam,
            a=a,
            g=0.5 * (g + g.T),
            M=M,
            kmat=0.5 * (kmat + kmat.T),
            h=h.reshape(m, m),
            phi=float(phi[0]),
            provenance=PROVENANCE_TABULATED,
        )


# ---------------------------
#   AffineSurrogateProvider
# ---------------------------
class AffineSurrogateProvider(GeometryProvider):
    """Constant metric, affine drift M = c + A lambda and quadratic phi."""

    name = "affine"

    def __init__(self, metric, drift_matrix, phi_matrix, drift_offset=None) -> None:
        self.metric = np.atleast_2d(np.asarray(metric, dtype=float))
        self.drift_matrix = np.atleast_2d(np.asarray(drift_matrix, dtype=float))
        self.phi_matrix = np.atleast_2d(np.asarray(phi_matrix, dtype=float))
        self.m = self.metric.shape[0]
        self.drift_offset = np.zeros(self.m) if drift_offset is None else as_vector(drift_offset)
        for mat in (self.metric, self.drift_matrix, self.phi_matrix):
            if mat.shape != (self.m, self.m):
                raise InvalidParameterError("surrogate matrices must be square and of equal size")

    def _evaluate(self, coords: TrialCoordinates) -> GeometryPoint:
        lam = coords.lam
        return GeometryPoint(
            lam=lam,
            a=lam.copy(),
            g=self.metric,
            M=self.drift_offset + self.drift_matrix @ lam,
            kmat=self.phi_matrix,
            h=-self.drift_matrix,
            phi=float(lam @ self.phi_matrix @ lam),
            provenance=PROVENANCE_SURROGATE,
        )


# ---------------------------
#   HarmonicSurrogateProvider
# ---------------------------
class HarmonicSurrogateProvider(AffineSurrogateProvider):
    """One-dimensional surrogate with g = 1, M = 0 and phi = kappa^2 u^2."""

    name = "harmonic"

    def __init__(self, kappa: float) -> None:
        if not kappa >= 0.0:
            raise InvalidParameterError(f"kappa must be non-negative, got {kappa}")
        self.kappa = float(kappa)
        super().__init__([[1.0]], [[0.0]], [[self.kappa**2]])


# ---------------------------
#   FreeSurrogateProvider
# ---------------------------
class FreeSurrogateProvider(HarmonicSurrogateProvider):
    """Pure Wiener surrogate, phi = 0."""

    name = "free"

    def __init__(self) -> None:
        super().__init__(0.0)


# ---------------------------
#   default_lambda_dot
# ---------------------------
def default_lambda_dot(m: int) -> np.ndarray:
    """Alternating-sign test velocity used by the identity suite."""
    return DEFAULT_LAMBDA_DOT_SCALE * (-1.0) ** np.arange(m)


# ---------------------------
#   liouville_residual_samples
# ---------------------------
def liouville_residual_samples(model: HamiltonianModel, lam, lambda_dot, count: int, seed: int, beta: float = DEFAULT_BETA) -> np.ndarray:
    """R = lambda_dot.(A - a) + lambda.LA on trial-density draws."""
    lam = as_vector(lam, "lambda")
    lambda_dot = as_vector(lambda_dot, "lambda_dot")
    samples = sample_trial(model, lam, beta, count, seed)
    mean, _ = model.trial_moments(lam, beta)
    a = model.resolved_matrix @ mean
    return (model.resolved(samples) - a) @ lambda_dot + model.liouville(samples) @ lam


# ---------------------------
#   identity_suite
# ---------------------------
def identity_suite(
    model: HamiltonianModel,
    lam,
    beta: float,
    count: int,
    seed: int,
    lambda_dot=None,
    step: float = FD_STEP_GEOMETRY,
    factor: float = SE_FACTOR,
) -> Report:
    """Sampled checks of the expectation identities of the trial family.

    Each entry is the sample mean of a per-draw statistic whose expectation
    vanishes exactly; derivatives in lambda and along lambda(t) use common
    random numbers so the finite differences are paired with the draws.
    """
    if count < 10_000:
        raise InvalidParameterError(f"identity suite needs at least 10^4 samples, got {count}")
    lam = as_vector(lam, "lambda")
    lambda_dot = default_lambda_dot(model.m) if lambda_dot is None else as_vector(lambda_dot, "lambda_dot")
    proj = model.resolved_matrix
    report = Report(f"identities[{model.name}]")

    def _draw(point):
        samples = sample_trial(model, point, beta, count, seed)
        mean, _ = model.trial_moments(point, beta)
        return samples, proj @ mean

    samples, a = _draw(lam)
    dev = model.resolved(samples) - a
    lres = model.liouville(samples)
    l2res = model.liouville_squared(samples)
    drive = lres @ lam
    resid = dev @ lambda_dot + drive

    def _add(name, values):
        mean, se = paired_mean(values)
        report.add_statistical(name, float(mean), float(se), factor, atol=1e-10)

    _add("mean_residual", resid)
    _add("lambda_dot_M", drive)
    _add("lambda_h_lambda", (dev @ lam) * drive)
    for i in range(model.m):
        _add(f"M_equals_minus_h_lambda[{i}]", lres[:, i] + dev[:, i] * drive)
    for j in range(model.m):
        _add(f"liouville_squared[{j}]", l2res[:, j] + drive * lres[:, j])

    for j in range(model.m):
        shift = np.zeros(model.m)
        shift[j] = step
        plus, _ = _draw(lam + shift)
        minus, _ = _draw(lam - shift)
        dm = (model.liouville(plus) - model.liouville(minus)) / (2.0 * step)
        for i in range(model.m):
            _add(f"dM_dlambda[{i},{j}]", dm[:, i] - dev[:, j] * lres[:, i])

    a_plus = proj @ model.trial_moments(lam + step * lambda_dot, beta)[0]
    a_minus = proj @ model.trial_moments(lam - step * lambda_dot, beta)[0]
    time_part = -lambda_dot @ (a_plus - a_minus) / (2.0 * step) + lres @ lambda_dot
    liouville_part = lres @ lambda_dot + l2res @ lam
    _add("time_derivative_residual", time_part + liouville_part + resid**2)

    _LOGGER.info("%s: %d/%d identities pass", report.title, sum(e.passed for e in report.entries), len(report.entries))
    return report
