"""Quadratic gauge, drift ODE and Ornstein-Uhlenbeck reduction near a fixed point."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .const import (
    BLOWUP_FACTOR,
    FD_STEP_GEOMETRY,
    FIXED_POINT_TOL,
    HJ_SAMPLE_COUNT,
    HJ_SAMPLE_RADIUS,
    VALIDITY_RADIUS,
)
from .diagnostics import Report
from .exceptions import (
    BranchSelectionError,
    DegenerateCorrectionError,
    FixedPointNotFoundError,
    InvalidParameterError,
    NonHurwitzDriftError,
    WrongBranchError,
)
from .geometry import GeometryProvider, HarmonicSurrogateProvider
from .harmonic import HarmonicSpec, extremal_closed, thermo_path
from .helper import as_vector, central_gradient, central_hessian, central_jacobian, rk4_step
from .lagrangian import LagrangianContext, Path, hj_residual
from .paths import solve_extremal

_LOGGER = logging.getLogger(__name__)

NEWTON_MAX_ITER = 50
CORRECTION_RTOL = 1e-6


# ---------------------------
#   GaugeSolution
# ---------------------------
@dataclass(frozen=True)
class GaugeSolution:
    """Quadratic stationary HJ solution f_s = (l - a*)^T G (l - a*) / 2."""

    alpha_star: np.ndarray
    G: np.ndarray
    drift_lin: np.ndarray
    metric: np.ndarray
    m_jacobian: np.ndarray
    phi_hessian: np.ndarray
    hj_sample_residual: float
    provider: GeometryProvider = field(repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.alpha_star.size

    def f_s(self, lam) -> float:
        dev = as_vector(lam) - self.alpha_star
        return 0.5 * float(dev @ self.G @ dev)

    def grad_f_s(self, lam) -> np.ndarray:
        return self.G @ (as_vector(lam) - self.alpha_star)

    def drift(self, lam: np.ndarray) -> np.ndarray:
        """Phi(l) = g^-1 (grad f_s + M)."""
        pt = self.provider.point(lam)
        return np.linalg.solve(pt.g, self.grad_f_s(lam) + pt.M)

    @property
    def drift_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.drift_lin)

    @property
    def hurwitz(self) -> bool:
        return bool(np.max(self.drift_eigenvalues.real) < 0.0)


# ---------------------------
#   WeakNoiseResult
# ---------------------------
@dataclass(frozen=True)
class WeakNoiseResult:
    alpha_path: Path
    sigma: np.ndarray
    thermo_path: Path


def _stationarity(provider: GeometryProvider, alpha: np.ndarray) -> np.ndarray:
    pt = provider.point(alpha)
    grad_phi = central_gradient(lambda a: provider.point(a).phi, alpha, FD_STEP_GEOMETRY)
    return np.concatenate([pt.M, 0.5 * grad_phi])


def _find_fixed_point(provider: GeometryProvider, guess: np.ndarray, tol: float) -> np.ndarray:
    """Damped Gauss-Newton on the stacked residual (M, grad phi / 2)."""
    alpha = guess.copy()
    resid = _stationarity(provider, alpha)
    for iteration in range(NEWTON_MAX_ITER):
        size = float(np.max(np.abs(resid)))
        if size <= tol:
            return alpha
        jac = central_jacobian(lambda a: _stationarity(provider, a), alpha, FD_STEP_GEOMETRY)
        step = np.linalg.lstsq(jac, -resid, rcond=None)[0]
        scale = 1.0
        while scale > 1e-6:
            trial = alpha + scale * step
            trial_resid = _stationarity(provider, trial)
            if np.max(np.abs(trial_resid)) < size:
                break
            scale *= 0.5
        else:
            break
        alpha, resid = trial, trial_resid
        _LOGGER.debug("fixed point %d: %s residual %.3e", iteration, alpha, np.max(np.abs(resid)))
    raise FixedPointNotFoundError(f"no fixed point with M = 0 and phi stationary near {guess}")


# ---------------------------
#   stationary_hj_quadratic
# ---------------------------
def stationary_hj_quadratic(
    provider: GeometryProvider,
    alpha_star_guess,
    tol: float = FIXED_POINT_TOL,
    sample_count: int = HJ_SAMPLE_COUNT,
    seed: int = 0,
) -> GaugeSolution:
    """Quadratic solution of the stationary HJ equation on its Hurwitz branch."""
    guess = as_vector(alpha_star_guess, "alpha_star_guess")
    if guess.size != provider.m:
        raise InvalidParameterError(f"guess must have {provider.m} coordinates")
    alpha = _find_fixed_point(provider, guess, tol)
    centre = provider.point(alpha)
    if np.max(np.abs(centre.M)) > tol or centre.phi > tol:
        raise FixedPointNotFoundError(f"stationary point {alpha} has M = {centre.M}, phi = {centre.phi:.3e}")

    metric = centre.g
    m_jac = central_jacobian(lambda a: provider.point(a).M, alpha, FD_STEP_GEOMETRY)
    phi_hess = 0.5 * central_hessian(lambda a: provider.point(a).phi, alpha, FD_STEP_GEOMETRY)

    a_mat = np.linalg.solve(metric, m_jac)
    q_mat = phi_hess - m_jac.T @ a_mat
    q_mat = 0.5 * (q_mat + q_mat.T)
    try:
        x_mat = linalg.solve_continuous_are(a_mat, np.eye(provider.m), q_mat, metric)
    except (linalg.LinAlgError, ValueError) as err:
        raise BranchSelectionError(f"no stabilising quadratic gauge at {alpha}: {err}") from err

    gain = -0.5 * (x_mat + x_mat.T)
    drift_lin = np.linalg.solve(metric, m_jac + gain)
    eigs = np.linalg.eigvals(drift_lin)
    if not np.all(np.isfinite(eigs)) or np.max(eigs.real) >= 0.0:
        raise BranchSelectionError(f"linearised drift at {alpha} is not Hurwitz (eigenvalues {eigs})")

    ctx = LagrangianContext(provider, 1.0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(sample_count):
        direction = rng.standard_normal(provider.m)
        dev = HJ_SAMPLE_RADIUS * rng.uniform(0.0, 1.0) * direction / np.linalg.norm(direction)
        worst = max(worst, abs(hj_residual(ctx, gain @ dev, 0.0, alpha + dev)))
    _LOGGER.debug("gauge at %s: G=%s, sampled HJ residual %.3e", alpha, gain.tolist(), worst)
    return GaugeSolution(alpha, gain, drift_lin, metric, m_jac, phi_hess, worst, provider)


# ---------------------------
#   drift_ode_solve
# ---------------------------
def drift_ode_solve(gauge: GaugeSolution, lam0, T: float, dt: float) -> Path:
    """RK4 integration of lambda_dot = g^-1 (grad f_s + M)."""
    lam = as_vector(lam0, "lambda0")
    if not (T > 0.0 and dt > 0.0):
        raise InvalidParameterError("T and dt must be positive")
    start = float(np.linalg.norm(lam - gauge.alpha_star))
    if start > VALIDITY_RADIUS:
        _LOGGER.warning("lambda0 is %.3g from the fixed point, outside the quadratic expansion's validity radius %.3g", start, VALIDITY_RADIUS)
    limit = BLOWUP_FACTOR * max(start, FIXED_POINT_TOL)

    steps = int(round(T / dt))
    points = [lam]
    for n in range(steps):
        lam = rk4_step(gauge.drift, lam, dt)
        if not np.all(np.isfinite(lam)) or np.linalg.norm(lam - gauge.alpha_star) > limit:
            raise WrongBranchError(f"drift integration left the neighbourhood of the fixed point at t = {(n + 1) * dt:.4g}")
        points.append(lam)
    return Path(np.linspace(0.0, steps * dt, steps + 1), np.array(points))


# ---------------------------
#   stationary_covariance
# ---------------------------
def stationary_covariance(gauge: GaugeSolution, delta_t: float) -> np.ndarray:
    """Steady Ornstein-Uhlenbeck covariance on the lambda scale."""
    if not delta_t > 0.0:
        raise InvalidParameterError(f"delta_t must be positive, got {delta_t}")
    if not gauge.hurwitz:
        raise NonHurwitzDriftError(f"drift eigenvalues {gauge.drift_eigenvalues} are not all stable")
    noise = np.linalg.inv(delta_t * gauge.metric)
    sigma = linalg.solve_continuous_lyapunov(gauge.drift_lin, -noise)
    sigma = 0.5 * (sigma + sigma.T)
    if np.linalg.eigvalsh(sigma).min() <= 0.0:
        raise NonHurwitzDriftError("stationary covariance is not positive definite")
    return sigma


# ---------------------------
#   ottinger_path
# ---------------------------
def ottinger_path(gauge: GaugeSolution, sigma, lam0, T: float, dt: float) -> Path:
    """Thermodynamical path a* + (I + sigma G)^-1 (alpha(t) - a*)."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    correction = np.eye(gauge.m) + sigma @ gauge.G
    if not np.all(np.isfinite(correction)):
        raise DegenerateCorrectionError("I + sigma G is not finite")
    smallest = float(np.linalg.svd(correction, compute_uv=False).min())
    if smallest <= CORRECTION_RTOL * max(1.0, float(np.linalg.norm(sigma @ gauge.G, 2))):
        raise DegenerateCorrectionError("I + sigma G is singular; the weak-noise correction is undefined")
    alpha = drift_ode_solve(gauge, lam0, T, dt)
    shifted = np.linalg.solve(correction, (alpha.points - gauge.alpha_star).T).T
    return Path(alpha.times, gauge.alpha_star + shifted)


# ---------------------------
#   weak_noise_analysis
# ---------------------------
def weak_noise_analysis(gauge: GaugeSolution, lam0, T: float, dt: float, delta_t: float) -> WeakNoiseResult:
    sigma = stationary_covariance(gauge, delta_t)
    return WeakNoiseResult(
        alpha_path=drift_ode_solve(gauge, lam0, T, dt),
        sigma=sigma,
        thermo_path=ottinger_path(gauge, sigma, lam0, T, dt),
    )


def _backward_gauge_path(gauge: GaugeSolution, u0: float, T: float, steps: int) -> Path:
    """Integrate the time-dependent quadratic HJ gauge back from a(T) = 0, then its drift forward."""
    g = float(gauge.metric[0, 0])
    a_m = float(gauge.m_jacobian[0, 0])
    phi2 = float(gauge.phi_hessian[0, 0])
    h = T / steps

    # a on half-step nodes, t = T down to 0
    half = np.empty(2 * steps + 1)
    half[-1] = 0.0
    rate = lambda a: -(phi2 - (a + a_m) ** 2 / g)  # noqa: E731  (d a / d(-t))
    for k in range(2 * steps, 0, -1):
        half[k - 1] = rk4_step(rate, np.array(half[k]), 0.5 * h)

    times = np.linspace(0.0, T, steps + 1)
    u = np.empty(steps + 1)
    u[0] = u0
    for n in range(steps):
        drift = [(half[2 * n + j] + a_m) / g for j in range(3)]
        k1 = drift[0] * u[n]
        k2 = drift[1] * (u[n] + 0.5 * h * k1)
        k3 = drift[1] * (u[n] + 0.5 * h * k2)
        k4 = drift[2] * (u[n] + h * k3)
        u[n + 1] = u[n] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Path(times, u)


# ---------------------------
#   om_decomposition_check
# ---------------------------
def om_decomposition_check(gauge: GaugeSolution, spec: HarmonicSpec, T: float, n_nodes: int = 1000) -> Report:
    """Gauge-decomposed kernel and backward-HJ path against the closed forms."""
    provider = gauge.provider
    if not isinstance(provider, HarmonicSurrogateProvider) or not np.isclose(provider.kappa, spec.kappa):
        raise InvalidParameterError("the decomposition check needs the harmonic surrogate with matching kappa")
    kappa, dlt, u0 = spec.kappa, spec.delta_t, spec.u0
    gain = float(gauge.G[0, 0])
    report = Report("om_decomposition")

    mean = u0 * np.exp(-kappa * T)
    var = (1.0 - np.exp(-2.0 * kappa * T)) / (2.0 * kappa * dlt)
    argmax = mean / (1.0 + dlt * gain * var)
    expected = thermo_path(spec, T)
    report.add("om_argmax", argmax, expected, passed=abs(argmax - expected) <= 1e-8)

    def log_weight(u):
        return -dlt * 0.5 * gain * u * u - (u - mean) ** 2 / (2.0 * var)

    spread = np.sqrt(var)
    vertex = argmax + spread * 0.5 * (log_weight(argmax - spread) - log_weight(argmax + spread)) / (
        log_weight(argmax - spread) - 2.0 * log_weight(argmax) + log_weight(argmax + spread)
    )
    report.add("om_argmax_numeric", vertex, expected, passed=abs(vertex - expected) <= 1e-8)

    backward = _backward_gauge_path(gauge, u0, T, n_nodes - 1)
    closed = extremal_closed(spec, expected, T, backward.times)
    closed_gap = float(np.max(np.abs(backward.points[:, 0] - closed)))
    report.add("backward_hj_vs_closed_extremal", closed_gap, 1e-4, passed=closed_gap <= 1e-4)
    ctx = LagrangianContext(provider, dlt)
    numeric = solve_extremal(ctx, [u0], [expected], T, n_nodes)
    gap = float(np.max(np.abs(backward.points[:, 0] - numeric.path.points[:, 0])))
    report.add("backward_hj_vs_extremal", gap, 1e-4, passed=numeric.converged and gap <= 1e-4)
    thermo_gap = float(np.max(np.abs(backward.points[:, 0] - thermo_path(spec, backward.times))))
    report.add("backward_hj_vs_thermodynamical", thermo_gap, 0.0, note="separation from the thermodynamical path")
    return report
