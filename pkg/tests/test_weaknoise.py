"""Tests for the quadratic gauge and the weak-noise reduction.

Contract:

  * On the harmonic surrogate the Hurwitz branch is G = -kappa, the drift
    relaxes as exp(-kappa t), sigma = 1 / (2 kappa Delta_t) and the
    corrected path is exp(-kappa t) / (1 - 1 / (2 Delta_t)).
  * A damped rotation has isotropic covariance matching a stochastic
    simulation; the undamped oscillator has no Hurwitz branch.
  * The gauge-decomposed kernel peaks at u0 sech(kappa T) and the backward
    gauge path is the extremal.
  * The Lagrangian splits pointwise into the completed square plus the
    total derivative of the gauge.
"""

import logging

import numpy as np
import pytest

from liouville_closure.exceptions import (
    BranchSelectionError,
    DegenerateCorrectionError,
    InvalidParameterError,
    NonHurwitzDriftError,
    WrongBranchError,
)
from liouville_closure.geometry import AffineSurrogateProvider, HarmonicSurrogateProvider
from liouville_closure.harmonic import HarmonicSpec
from liouville_closure.lagrangian import LagrangianContext, completed_square, fw_hamiltonian, lagrangian_value
from liouville_closure.weaknoise import (
    GaugeSolution,
    drift_ode_solve,
    om_decomposition_check,
    ottinger_path,
    stationary_covariance,
    stationary_hj_quadratic,
    weak_noise_analysis,
)

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])
DAMPING = 1.0


@pytest.fixture
def harmonic_gauge(harmonic_provider) -> GaugeSolution:
    return stationary_hj_quadratic(harmonic_provider, [0.3])


@pytest.fixture
def rotation_provider() -> AffineSurrogateProvider:
    """M = (l2, -l1), phi = (1 + damping^2) |l|^2."""
    return AffineSurrogateProvider(np.eye(2), ROTATION, (1.0 + DAMPING**2) * np.eye(2))


def _unstable(provider) -> GaugeSolution:
    return GaugeSolution(np.zeros(1), np.eye(1), np.eye(1), np.eye(1), np.zeros((1, 1)), np.eye(1), 0.0, provider)


def test_harmonic_gauge(harmonic_gauge) -> None:
    assert harmonic_gauge.alpha_star == pytest.approx([0.0], abs=1e-8)
    assert harmonic_gauge.G[0, 0] == pytest.approx(-1.0, abs=1e-8)
    assert harmonic_gauge.drift_lin[0, 0] == pytest.approx(-1.0, abs=1e-8)
    assert harmonic_gauge.hurwitz
    assert harmonic_gauge.f_s([2.0]) == pytest.approx(-2.0, abs=1e-7)
    assert harmonic_gauge.hj_sample_residual < 1e-10


def test_gauge_scales_with_kappa() -> None:
    gauge = stationary_hj_quadratic(HarmonicSurrogateProvider(2.5), [0.0])
    assert gauge.G[0, 0] == pytest.approx(-2.5, abs=1e-7)


def test_damped_rotation_gauge(rotation_provider) -> None:
    gauge = stationary_hj_quadratic(rotation_provider, [0.1, -0.1])
    assert np.allclose(gauge.G, -DAMPING * np.eye(2), atol=1e-7)
    assert np.allclose(gauge.drift_lin, ROTATION - DAMPING * np.eye(2), atol=1e-7)
    assert gauge.drift_eigenvalues.real == pytest.approx([-DAMPING, -DAMPING], abs=1e-7)
    assert gauge.hj_sample_residual < 1e-8


def test_undamped_oscillator_has_no_hurwitz_branch(oscillator_provider) -> None:
    with pytest.raises(BranchSelectionError):
        stationary_hj_quadratic(oscillator_provider, [0.0, 0.0])


def test_guess_must_match_dimension(harmonic_provider) -> None:
    with pytest.raises(InvalidParameterError):
        stationary_hj_quadratic(harmonic_provider, [0.0, 0.0])


def test_drift_relaxes_exponentially(harmonic_gauge) -> None:
    path = drift_ode_solve(harmonic_gauge, [1.0], 5.0, 0.01)
    assert np.max(np.abs(path.points[:, 0] - np.exp(-path.times))) < 1e-6


def test_drift_from_fixed_point_is_constant(harmonic_gauge) -> None:
    path = drift_ode_solve(harmonic_gauge, harmonic_gauge.alpha_star, 2.0, 0.01)
    assert np.all(path.points == harmonic_gauge.alpha_star)


def test_drift_reaches_fixed_point(harmonic_gauge, rotation_provider) -> None:
    assert abs(drift_ode_solve(harmonic_gauge, [0.8], 40.0, 0.01).points[-1, 0]) < 1e-8
    gauge = stationary_hj_quadratic(rotation_provider, [0.0, 0.0])
    assert np.linalg.norm(drift_ode_solve(gauge, [0.5, 0.5], 40.0, 0.01).points[-1]) < 1e-8


def test_drift_warns_outside_validity_radius(harmonic_gauge, caplog) -> None:
    with caplog.at_level(logging.WARNING):
        drift_ode_solve(harmonic_gauge, [2.0], 1.0, 0.01)
    assert "validity radius" in caplog.text


def test_wrong_branch_blows_up(harmonic_provider) -> None:
    with pytest.raises(WrongBranchError):
        drift_ode_solve(_unstable(harmonic_provider), [0.5], 10.0, 0.01)


def test_harmonic_covariance(harmonic_gauge) -> None:
    assert stationary_covariance(harmonic_gauge, 1.0)[0, 0] == pytest.approx(0.5, abs=1e-8)
    assert stationary_covariance(harmonic_gauge, 2.0)[0, 0] == pytest.approx(0.25, abs=1e-8)


def test_covariance_refuses_unstable_drift(harmonic_provider) -> None:
    with pytest.raises(NonHurwitzDriftError):
        stationary_covariance(_unstable(harmonic_provider), 1.0)


def test_covariance_matches_stochastic_simulation(rotation_provider) -> None:
    gauge = stationary_hj_quadratic(rotation_provider, [0.0, 0.0])
    sigma = stationary_covariance(gauge, 1.0)
    assert np.allclose(sigma, 0.5 * np.eye(2), atol=1e-8)

    rng = np.random.default_rng(2024)
    chains, steps, dt = 4000, 2000, 0.01
    state = np.zeros((chains, 2))
    for _ in range(steps):
        state = state + dt * state @ gauge.drift_lin.T + np.sqrt(dt) * rng.standard_normal((chains, 2))
    empirical = np.cov(state.T)
    se = np.sqrt((sigma**2 + np.outer(np.diag(sigma), np.diag(sigma))) / chains)
    assert np.all(np.abs(empirical - sigma) <= 3.0 * se)


def test_corrected_path_doubles_the_drift_path(harmonic_gauge) -> None:
    path = ottinger_path(harmonic_gauge, [[0.5]], [1.0], 3.0, 0.01)
    assert path.at(3.0)[0] == pytest.approx(2.0 * np.exp(-3.0), abs=1e-6)
    assert path.at(3.0)[0] == pytest.approx(0.099574, abs=1e-6)


def test_corrected_path_for_general_delta_t(harmonic_gauge) -> None:
    result = weak_noise_analysis(harmonic_gauge, [1.0], 2.0, 0.01, delta_t=2.0)
    assert result.sigma[0, 0] == pytest.approx(0.25, abs=1e-8)
    expected = np.exp(-result.thermo_path.times) / (1.0 - 1.0 / 4.0)
    assert np.max(np.abs(result.thermo_path.points[:, 0] - expected)) < 1e-6
    assert np.array_equal(result.alpha_path.times, result.thermo_path.times)


def test_corrected_path_from_fixed_point(harmonic_gauge) -> None:
    path = ottinger_path(harmonic_gauge, [[0.5]], harmonic_gauge.alpha_star, 1.0, 0.1)
    assert np.all(path.points == harmonic_gauge.alpha_star)


def test_singular_correction(harmonic_gauge) -> None:
    with pytest.raises(DegenerateCorrectionError):
        ottinger_path(harmonic_gauge, [[1.0]], [1.0], 1.0, 0.1)


def test_decomposition_check(harmonic_gauge) -> None:
    report = om_decomposition_check(harmonic_gauge, HarmonicSpec(kappa=1.0, u0=1.0), 1.0)
    assert report.passed
    assert report["om_argmax"].value == pytest.approx(0.648054, abs=1e-6)
    assert report["backward_hj_vs_closed_extremal"].value < 1e-6
    assert report["backward_hj_vs_thermodynamical"].value > 0.01


def test_decomposition_short_horizon(harmonic_gauge) -> None:
    report = om_decomposition_check(harmonic_gauge, HarmonicSpec(kappa=1.0, u0=1.0), 1e-3, n_nodes=50)
    assert report["om_argmax"].value == pytest.approx(1.0, abs=1e-5)


def test_decomposition_needs_matching_surrogate(harmonic_gauge, rotation_provider) -> None:
    with pytest.raises(InvalidParameterError):
        om_decomposition_check(harmonic_gauge, HarmonicSpec(kappa=2.0, u0=1.0), 1.0)
    gauge = stationary_hj_quadratic(rotation_provider, [0.0, 0.0])
    with pytest.raises(InvalidParameterError):
        om_decomposition_check(gauge, HarmonicSpec(kappa=1.0, u0=1.0), 1.0)


def test_decomposition_identity_on_random_tuples(rotation_provider) -> None:
    """L = completed square + lambda_dot . grad f - H(grad f) pointwise, with H = 0 on the gauge."""
    gauge = stationary_hj_quadratic(rotation_provider, [0.0, 0.0])
    ctx = LagrangianContext(rotation_provider, 1.0)
    rng = np.random.default_rng(8)
    for _ in range(20):
        lam, velocity = rng.uniform(-2.0, 2.0, (2, 2))
        grad = gauge.grad_f_s(lam)
        hamiltonian = fw_hamiltonian(ctx, grad, lam)
        assert abs(hamiltonian) < 1e-6
        rebuilt = completed_square(ctx, lam, velocity, grad) + velocity @ grad - hamiltonian
        assert rebuilt == pytest.approx(lagrangian_value(ctx, lam, velocity), abs=1e-8)
