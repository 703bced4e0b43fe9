"""Tests for the trial-manifold geometry providers.

Contract:

  * The closed-form oracle reproduces the oscillator geometry exactly:
    ``g = I / beta``, ``M = J lambda / beta``, ``h_ij = <(A_i - a_i) LA_j>``
    and ``IL_rev = phi - M g^-1 M = 0``.
  * ``lambda . M = 0`` and ``IL_rev >= 0`` on every provider.
  * Monte Carlo geometry agrees with the oracle within its standard errors,
    and its error shrinks like ``1 / sqrt(count)``.
  * A singular metric raises ``DegenerateGeometryError`` carrying the
    offending direction; a tabulated lookup outside the table raises
    ``GeometryOutOfRangeError``.
  * The identity suite passes on both models at 3 standard errors.
"""

import numpy as np
import pytest

from liouville_closure.exceptions import (
    DegenerateGeometryError,
    GeometryOutOfRangeError,
    InvalidParameterError,
    UnsupportedModelError,
)
from liouville_closure.geometry import (
    AffineSurrogateProvider,
    ClosedFormProvider,
    FreeSurrogateProvider,
    HarmonicSurrogateProvider,
    MonteCarloProvider,
    TabulatedProvider,
    TrialCoordinates,
    geometry_at,
    identity_suite,
    liouville_residual_samples,
)
from liouville_closure.models import OscillatorModel


class _CubicModel(OscillatorModel):
    name = "cubic"

    def flow(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1] ** 3, -x[..., 0] ** 3], axis=-1)


def test_oscillator_closed_form_values(oscillator_provider) -> None:
    pt = oscillator_provider.point([0.5, 0.2])
    assert np.allclose(pt.a, [0.5, 0.2])
    assert np.allclose(pt.g, np.eye(2))
    assert np.allclose(pt.M, [0.2, -0.5])
    assert np.allclose(pt.h, [[0.0, -1.0], [1.0, 0.0]])
    assert pt.phi == pytest.approx(0.29)
    assert abs(pt.il_rev_density) < 1e-12
    assert pt.invariant_violations() == []


def test_metric_scales_with_inverse_beta(oscillator) -> None:
    pt = geometry_at(ClosedFormProvider(oscillator, beta=2.0), TrialCoordinates([1.0, 0.0], 2.0))
    assert np.allclose(pt.g, 0.5 * np.eye(2))
    assert np.allclose(pt.a, [0.5, 0.0])


def test_drift_matches_minus_h_lambda(oscillator_provider, tbh) -> None:
    lam = np.array([0.3, -0.7])
    for provider in (oscillator_provider, ClosedFormProvider(tbh)):
        pt = provider.point(lam)
        assert np.allclose(pt.M, -pt.h @ lam, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_tbh_closed_form_invariants(tbh, seed) -> None:
    lam = np.random.default_rng(seed).uniform(-1.0, 1.0, tbh.m)
    pt = ClosedFormProvider(tbh).point(lam)
    assert abs(lam @ pt.M) < 1e-12
    assert pt.il_rev_density >= -1e-12
    assert pt.invariant_violations() == []


def test_oscillator_reversible_loss_vanishes_everywhere(oscillator_provider) -> None:
    rng = np.random.default_rng(4)
    for lam in rng.uniform(-2.0, 2.0, (20, 2)):
        assert abs(oscillator_provider.point(lam).il_rev_density) < 1e-12


def test_non_quadratic_flow_rejected_by_oracle() -> None:
    with pytest.raises(UnsupportedModelError):
        ClosedFormProvider(_CubicModel())


def test_singular_metric_reports_direction() -> None:
    provider = AffineSurrogateProvider([[1.0, 0.0], [0.0, 0.0]], np.zeros((2, 2)), np.eye(2))
    with pytest.raises(DegenerateGeometryError) as info:
        provider.point([0.1, 0.1])
    assert np.allclose(np.abs(info.value.direction), [0.0, 1.0])


def test_coordinates_validated() -> None:
    with pytest.raises(InvalidParameterError):
        TrialCoordinates([0.0, 0.0], beta=0.0)
    with pytest.raises(InvalidParameterError):
        TrialCoordinates([np.inf, 0.0])


def test_wrong_dimension_rejected(oscillator_provider) -> None:
    with pytest.raises(InvalidParameterError):
        oscillator_provider.point([0.1, 0.2, 0.3])


def test_monte_carlo_within_standard_errors(oscillator, oscillator_provider) -> None:
    lam = [0.5, 0.2]
    exact = oscillator_provider.point(lam)
    sampled = MonteCarloProvider(oscillator, count=100_000, seed=3).point(lam)
    assert sampled.provenance == "monte_carlo"
    for key in ("a", "M", "g"):
        gap = np.abs(getattr(sampled, key) - getattr(exact, key))
        assert np.all(gap <= 4.0 * sampled.se[key] + 1e-12), key


def test_monte_carlo_tbh_drift(tbh) -> None:
    lam = [0.5, 0.2]
    exact = ClosedFormProvider(tbh).point(lam)
    sampled = MonteCarloProvider(tbh, count=200_000, seed=8).point(lam)
    assert np.all(np.abs(sampled.M - exact.M) <= 4.0 * sampled.se["M"] + 1e-12)
    assert sampled.invariant_violations() == []


def test_monte_carlo_error_shrinks_like_inverse_root(oscillator, oscillator_provider) -> None:
    lam = [0.5, 0.2]
    exact = oscillator_provider.point(lam).M

    def rms(count):
        errors = [MonteCarloProvider(oscillator, count=count, seed=s).point(lam).M - exact for s in range(50)]
        return np.sqrt(np.mean(np.square(errors)))

    ratio = rms(2000) / rms(8000)
    assert 1.5 <= ratio <= 2.7


def test_monte_carlo_rejects_tiny_draws(oscillator) -> None:
    with pytest.raises(InvalidParameterError):
        MonteCarloProvider(oscillator, count=10, seed=0)


def test_tabulated_matches_oracle_and_refuses_extrapolation(oscillator_provider) -> None:
    axes = [np.linspace(-1.0, 1.0, 21)] * 2
    table = TabulatedProvider(oscillator_provider, axes)
    on_node = table.point([0.5, 0.2])
    assert np.allclose(on_node.M, oscillator_provider.point([0.5, 0.2]).M, atol=1e-12)
    between = table.point([0.33, -0.41])
    exact = oscillator_provider.point([0.33, -0.41])
    assert np.allclose(between.g, exact.g, atol=1e-12)
    assert np.allclose(between.M, exact.M, atol=1e-12)
    assert between.phi == pytest.approx(exact.phi, abs=1e-2)
    assert between.invariant_violations() == []
    with pytest.raises(GeometryOutOfRangeError):
        table.point([1.5, 0.0])


def test_harmonic_surrogate_geometry() -> None:
    pt = HarmonicSurrogateProvider(2.0).point([0.5])
    assert np.allclose(pt.g, [[1.0]])
    assert np.allclose(pt.M, [0.0])
    assert pt.phi == pytest.approx(1.0)
    assert FreeSurrogateProvider().point([3.0]).phi == 0.0
    with pytest.raises(InvalidParameterError):
        HarmonicSurrogateProvider(-1.0)


def test_liouville_residual_has_zero_mean(oscillator) -> None:
    resid = liouville_residual_samples(oscillator, [0.5, 0.2], [0.2, -0.2], 100_000, seed=6)
    assert abs(resid.mean()) <= 3.0 * resid.std(ddof=1) / np.sqrt(resid.size) + 1e-10


def test_identity_suite_oscillator(oscillator) -> None:
    report = identity_suite(oscillator, [0.5, 0.2], beta=1.0, count=100_000, seed=1)
    assert "M_equals_minus_h_lambda[0]" in report
    assert "dM_dlambda[1,0]" in report
    assert report.passed, [e for e in report.entries if not e.passed]


def test_identity_suite_tbh(tbh) -> None:
    report = identity_suite(tbh, [0.5, 0.2], beta=1.0, count=1_000_000, seed=2)
    assert report.passed, [e for e in report.entries if not e.passed]


def test_identity_suite_needs_enough_samples(oscillator) -> None:
    with pytest.raises(InvalidParameterError):
        identity_suite(oscillator, [0.5, 0.2], beta=1.0, count=1000, seed=0)
