"""Tests for extremal paths and the classical closure.

Contract:

  * The collocated extremal of the harmonic surrogate matches the closed
    form A e^t + B e^-t to 1e-4 on 2000 nodes and passes its audit.
  * The extremal is a strict local minimum of the discrete action and
    undercuts the action of the thermodynamical path u0 sech(t).
  * Its audit residual falls quadratically with refinement.
  * On the oscillator the reversible rotation is itself extremal and its
    action vanishes.
  * The closure minimiser tracks u0 sech(kappa T); a minimum on the grid
    edge raises with the partial result attached.
"""

import numpy as np
import pytest

from liouville_closure.exceptions import ClosureBoundaryError, InvalidParameterError
from liouville_closure.harmonic import HarmonicSpec, extremal_action_closed, extremal_closed, sech
from liouville_closure.lagrangian import Path, discrete_action
from liouville_closure.paths import classical_closure, node_terms, reversible_trajectory, solve_extremal
from liouville_closure.transfer import GridSpec


def test_harmonic_extremal_matches_closed_form(harmonic_ctx) -> None:
    sol = solve_extremal(harmonic_ctx, [1.0], [1.0], 1.0, 2000)
    assert sol.converged
    times = sol.path.times
    exact = extremal_closed(HarmonicSpec(kappa=1.0, u0=1.0), 1.0, 1.0, times)
    assert np.max(np.abs(sol.path.points[:, 0] - exact)) < 1e-4
    assert sol.path.at(0.5)[0] == pytest.approx(0.886819, abs=1e-4)
    b = (np.e - 1.0) / (2.0 * np.sinh(1.0))
    assert b == pytest.approx(0.73106, abs=1e-5)


def test_extremal_is_a_local_minimum(harmonic_ctx) -> None:
    sol = solve_extremal(harmonic_ctx, [1.0], [1.0], 1.0, 501)
    assert sol.converged
    times = sol.path.times
    best = discrete_action(harmonic_ctx, sol.path)
    rng = np.random.default_rng(5)
    modes = np.sin(np.outer(np.arange(1, 6), np.pi * times))
    for _ in range(20):
        bump = rng.standard_normal(5) @ modes
        bump *= 1e-2 / np.max(np.abs(bump))
        varied = Path(times, sol.path.points + bump[:, None])
        assert discrete_action(harmonic_ctx, varied) > best


def test_el_residual_falls_with_refinement(harmonic_ctx) -> None:
    residuals = []
    for n_nodes in (50, 100, 200):
        sol = solve_extremal(harmonic_ctx, [1.0], [1.0], 1.0, n_nodes)
        assert sol.converged
        residuals.append(sol.el_residual)
    assert residuals[0] / residuals[1] >= 3.0
    assert residuals[1] / residuals[2] >= 3.0


def test_extremal_undercuts_thermodynamical_path(harmonic_ctx) -> None:
    """Between (0, 1) and (5, sech 5) the extremal follows exp(-t), below sech(t)."""
    end = sech(5.0)
    sol = solve_extremal(harmonic_ctx, [1.0], [end], 5.0, 1001)
    assert sol.converged
    times = sol.path.times
    thermo = Path(times, sech(times))
    extremal_action = discrete_action(harmonic_ctx, sol.path)
    assert extremal_action < discrete_action(harmonic_ctx, thermo) - 0.1
    assert extremal_action == pytest.approx(extremal_action_closed(HarmonicSpec(kappa=1.0, u0=1.0), end, 5.0), abs=1e-4)
    assert np.max(np.abs(sol.path.points[:, 0] - sech(times))) > 0.05
    assert sol.path.at(2.5)[0] < sech(2.5) - 0.05


def test_gibbs_endpoints_give_constant_path(oscillator_ctx) -> None:
    sol = solve_extremal(oscillator_ctx, [0.0, 0.0], [0.0, 0.0], 2.0, 50)
    assert sol.converged
    assert np.all(sol.path.points == 0.0)
    assert discrete_action(oscillator_ctx, sol.path) == 0.0


def test_reversible_rotation_is_extremal(oscillator_ctx) -> None:
    T = 0.5
    end = np.array([np.cos(T), -np.sin(T)])
    sol = solve_extremal(oscillator_ctx, [1.0, 0.0], end, T, 1000)
    assert sol.converged
    flow = reversible_trajectory(oscillator_ctx, [1.0, 0.0], T, T / 999)
    assert np.max(np.abs(sol.path.points - flow.points)) < 1e-3
    assert discrete_action(oscillator_ctx, sol.path) == pytest.approx(0.0, abs=1e-6)


def test_reversible_trajectory_rotates(oscillator_ctx) -> None:
    flow = reversible_trajectory(oscillator_ctx, [1.0, 0.0], np.pi / 2, np.pi / 2000)
    assert flow.points[-1] == pytest.approx([0.0, -1.0], abs=1e-9)


def test_harmonic_node_terms(harmonic_ctx) -> None:
    terms = node_terms(harmonic_ctx, np.array([0.7]))
    assert np.allclose(terms.christoffel, 0.0)
    assert np.allclose(terms.curl, 0.0)
    assert terms.force == pytest.approx([0.7], abs=1e-8)


def test_extremal_rejects_bad_input(harmonic_ctx) -> None:
    with pytest.raises(InvalidParameterError):
        solve_extremal(harmonic_ctx, [1.0, 0.0], [1.0], 1.0, 100)
    with pytest.raises(InvalidParameterError):
        solve_extremal(harmonic_ctx, [1.0], [1.0], 0.0, 100)
    with pytest.raises(InvalidParameterError):
        solve_extremal(harmonic_ctx, [1.0], [1.0], 1.0, 3)


def test_closure_minimum_follows_sech(harmonic_ctx) -> None:
    grid = GridSpec((0.2,), (1.2,), (21,))
    result = classical_closure(harmonic_ctx, [1.0], 1.0, grid, n_nodes=200)
    assert result.invalid == 0
    assert result.lam_opt[0] == pytest.approx(1.0 / np.cosh(1.0), abs=1e-3)
    lam_opt, table = result
    assert table.shape == (21,)
    assert np.argmin(table) == np.argmin(np.abs(grid.axes[0] - lam_opt[0]))


def test_closure_long_horizon(harmonic_ctx) -> None:
    grid = GridSpec((-0.1,), (0.1,), (21,))
    result = classical_closure(harmonic_ctx, [1.0], 5.0, grid, n_nodes=400)
    assert result.lam_opt[0] == pytest.approx(1.0 / np.cosh(5.0), abs=1e-4)


def test_closure_from_gibbs_point_stays_there(harmonic_ctx) -> None:
    grid = GridSpec((-0.5,), (0.5,), (21,))
    for T in (0.5, 2.0):
        result = classical_closure(harmonic_ctx, [0.0], T, grid, n_nodes=100)
        assert result.lam_opt[0] == pytest.approx(0.0, abs=1e-12)


def test_closure_parallel_matches_serial(harmonic_ctx) -> None:
    grid = GridSpec((0.2,), (1.2,), (21,))
    serial = classical_closure(harmonic_ctx, [1.0], 1.0, grid, n_nodes=100)
    parallel = classical_closure(harmonic_ctx, [1.0], 1.0, grid, n_nodes=100, workers=3)
    assert np.array_equal(serial.table, parallel.table)


def test_closure_minimum_on_edge_raises(harmonic_ctx) -> None:
    grid = GridSpec((0.7,), (1.2,), (21,))
    with pytest.raises(ClosureBoundaryError) as err:
        classical_closure(harmonic_ctx, [1.0], 1.0, grid, n_nodes=100)
    assert err.value.result is not None
    assert err.value.result.lam_opt[0] == pytest.approx(0.7)


def test_closure_grid_dimension_must_match(harmonic_ctx) -> None:
    grid = GridSpec((0.0, 0.0), (1.0, 1.0), (16, 16))
    with pytest.raises(InvalidParameterError):
        classical_closure(harmonic_ctx, [1.0], 1.0, grid)
