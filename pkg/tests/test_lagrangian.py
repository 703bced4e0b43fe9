"""Tests for the information-loss Lagrangian.

Contract:

  * ``IL = IL_rev + IL_irr`` to machine precision; ``IL_rev`` vanishes on
    the oscillator, ``IL_irr`` vanishes along the reversible velocity.
  * The Lagrangian at unit weight is ``IL / Delta_t^2``.
  * The discrete action of the closed-form harmonic extremal reproduces
    ``S_e(1, 1) = coth(1) - csch(1)``; a straight line costs more.
  * Both signs of the stationary gauge solve the HJ equation on the
    harmonic surrogate, and the completed square differs from the
    Lagrangian by the total derivative of the gauge.
"""

import numpy as np
import pytest

from liouville_closure.exceptions import InvalidParameterError
from liouville_closure.geometry import ClosedFormProvider
from liouville_closure.harmonic import HarmonicSpec, extremal_closed
from liouville_closure.lagrangian import (
    LagrangianContext,
    Path,
    completed_square,
    discrete_action,
    entropy_rate_excess,
    fw_hamiltonian,
    hj_residual,
    il_decompose,
    lagrangian_value,
    reversible_velocity,
)

S_E_UNIT = 1.0 / np.tanh(1.0) - 1.0 / np.sinh(1.0)


def test_gibbs_rest_point_costs_nothing(oscillator_ctx) -> None:
    assert lagrangian_value(oscillator_ctx, [0.0, 0.0], [0.0, 0.0]) == 0.0


def test_harmonic_lagrangian_value(harmonic_ctx) -> None:
    assert lagrangian_value(harmonic_ctx, [1.0], [0.0]) == pytest.approx(0.5)


def test_reversible_flow_annihilates_oscillator_lagrangian(oscillator_ctx) -> None:
    assert lagrangian_value(oscillator_ctx, [1.0, 0.0], [0.0, -1.0]) == pytest.approx(0.0, abs=1e-12)
    pt = oscillator_ctx.geometry([1.0, 0.0])
    assert np.allclose(reversible_velocity(pt), [0.0, -1.0])


def test_harmonic_decomposition(harmonic_ctx) -> None:
    il, il_rev, il_irr = il_decompose(harmonic_ctx, [1.0], [0.0])
    assert (il, il_rev, il_irr) == pytest.approx((0.5, 0.5, 0.0))


@pytest.mark.parametrize("provider_name", ["oscillator", "tbh"])
def test_decomposition_exact_on_random_inputs(provider_name, oscillator, tbh) -> None:
    model = oscillator if provider_name == "oscillator" else tbh
    ctx = LagrangianContext(ClosedFormProvider(model), delta_t=0.7)
    rng = np.random.default_rng(12)
    for _ in range(10_000 // 50):
        lam, v = rng.uniform(-2.0, 2.0, (2, model.m))
        il, il_rev, il_irr = il_decompose(ctx, lam, v)
        assert il == pytest.approx(il_rev + il_irr, rel=1e-12, abs=1e-12)
        assert il_rev >= -1e-10 and il_irr >= 0.0
        if provider_name == "oscillator":
            assert abs(il_rev) < 1e-12
        assert lagrangian_value(ctx, lam, v) == pytest.approx(il / ctx.delta_t**2, rel=1e-12, abs=1e-12)


def test_reversible_velocity_has_no_irreversible_loss(tbh) -> None:
    ctx = LagrangianContext(ClosedFormProvider(tbh), 1.0)
    lam = np.array([0.4, -0.3])
    pt = ctx.geometry(lam)
    il, il_rev, il_irr = il_decompose(ctx, lam, pt.reversible_velocity)
    assert il_irr == pytest.approx(0.0, abs=1e-14)
    assert il == pytest.approx(il_rev)
    assert entropy_rate_excess(pt, pt.reversible_velocity) == pytest.approx(0.0, abs=1e-12)


def test_w_rev_weights_only_reversible_part(tbh) -> None:
    provider = ClosedFormProvider(tbh)
    lam, v = np.array([0.4, -0.3]), np.array([0.1, 0.2])
    base = LagrangianContext(provider, 1.0, w_rev=1.0)
    heavy = LagrangianContext(provider, 1.0, w_rev=1.3)
    _, il_rev, _ = il_decompose(base, lam, v)
    assert lagrangian_value(heavy, lam, v) - lagrangian_value(base, lam, v) == pytest.approx(0.3 * il_rev)


def test_action_of_constant_gibbs_path(oscillator_ctx) -> None:
    path = Path(np.linspace(0.0, 1.0, 11), np.zeros((11, 2)))
    assert discrete_action(oscillator_ctx, path) == 0.0


def test_action_of_closed_form_extremal(harmonic_ctx) -> None:
    times = np.linspace(0.0, 1.0, 2000)
    spec = HarmonicSpec(kappa=1.0, u0=1.0)
    path = Path(times, extremal_closed(spec, 1.0, 1.0, times))
    assert discrete_action(harmonic_ctx, path) == pytest.approx(S_E_UNIT, abs=1e-4)
    line = Path(times, np.ones_like(times))
    assert discrete_action(harmonic_ctx, line) > S_E_UNIT


def test_action_scales_with_delta_t(harmonic_provider) -> None:
    path = Path(np.linspace(0.0, 1.0, 50), np.linspace(1.0, 0.5, 50))
    one = discrete_action(LagrangianContext(harmonic_provider, 1.0), path)
    assert discrete_action(LagrangianContext(harmonic_provider, 2.5), path) == pytest.approx(2.5 * one)


def test_path_validation(harmonic_ctx) -> None:
    with pytest.raises(InvalidParameterError):
        Path([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(InvalidParameterError):
        Path([0.0, 1.0], [1.0, np.nan])
    with pytest.raises(InvalidParameterError):
        discrete_action(harmonic_ctx, Path([0.0], [1.0]))
    assert Path([0.0, 2.0], [0.0, 4.0]).at(0.5) == pytest.approx([1.0])


def test_context_validation(harmonic_provider) -> None:
    with pytest.raises(InvalidParameterError):
        LagrangianContext(harmonic_provider, 0.0)
    with pytest.raises(InvalidParameterError):
        LagrangianContext(harmonic_provider, 1.0, w_rev=-0.1)


def test_hamiltonian_values(harmonic_ctx, oscillator_ctx) -> None:
    u = 0.8
    assert fw_hamiltonian(harmonic_ctx, [u], [u]) == pytest.approx(0.0)
    pt = oscillator_ctx.geometry([1.0, 0.0])
    assert fw_hamiltonian(oscillator_ctx, -pt.M, [1.0, 0.0]) == pytest.approx(-0.5 * pt.phi)
    assert fw_hamiltonian(oscillator_ctx, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_both_stationary_gauge_branches(harmonic_ctx, sign) -> None:
    for u in np.linspace(-2.0, 2.0, 9):
        assert hj_residual(harmonic_ctx, [sign * u], 0.0, [u]) == pytest.approx(0.0, abs=1e-12)


def test_hj_residual_with_time_derivative(oscillator_ctx) -> None:
    lam = [0.3, 0.4]
    pt = oscillator_ctx.geometry(lam)
    assert hj_residual(oscillator_ctx, -pt.M, 0.5 * pt.phi, lam) == pytest.approx(0.0, abs=1e-12)


def test_gauge_identity_along_random_paths(harmonic_ctx) -> None:
    """completed square = L - d f/dt for f = -u^2 / 2 (kappa = 1)."""
    rng = np.random.default_rng(21)
    for _ in range(200):
        u, v = rng.uniform(-2.0, 2.0, 2)
        f_grad = -u
        total = completed_square(harmonic_ctx, [u], [v], [f_grad])
        assert total == pytest.approx(lagrangian_value(harmonic_ctx, [u], [v]) - v * f_grad, abs=1e-8)
