"""Liouville closure run coordinator.

Builds models, providers and grids from a validated RunConfig, runs one
subcommand and writes its CSV artifacts.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import pathlib
import tempfile
from collections.abc import Callable, Iterable

import numpy as np

from . import __version__
from .config import RunConfig
from .const import (
    CONF_ALPHA_GUESS,
    CONF_BATCHES,
    CONF_BETA,
    CONF_CONFINEMENT,
    CONF_COUNT,
    CONF_CUTOFF,
    CONF_DECAY_END,
    CONF_DECAY_START,
    CONF_DELTA_T,
    CONF_DT_PDE,
    CONF_EXTREMAL_HORIZON,
    CONF_HORIZON,
    CONF_INITIAL,
    CONF_K_RES,
    CONF_KAPPA,
    CONF_LAMBDA,
    CONF_LAMBDA0,
    CONF_LAMBDA_DOT,
    CONF_LAMBDA_END,
    CONF_LOWER,
    CONF_MAX_ITER,
    CONF_MODEL,
    CONF_N_NODES,
    CONF_N_SUB,
    CONF_N_SUB_LIST,
    CONF_POINTS,
    CONF_PROVIDER,
    CONF_SLICE_TIMES,
    CONF_SPECTRUM,
    CONF_STEP,
    CONF_STEPS,
    CONF_T_RESTART,
    CONF_TOLERANCE,
    CONF_TRIALS,
    CONF_U0,
    CONF_UPPER,
    CONF_W_REV,
    CONF_WIDTH,
    CONF_WORKERS,
    DOMAIN,
    EXIT_INVALID,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    MODEL_FREE,
    MODEL_HARMONIC,
    MODEL_OSCILLATOR,
    PROVIDER_MONTE_CARLO,
    PROVIDER_TABULATED,
    SECTION_CLOSURE,
    SECTION_GEOMETRY,
    SECTION_GRID,
    SECTION_HARMONIC,
    SECTION_MODEL,
    SECTION_PATHS,
    SECTION_PDE,
    SECTION_RUN,
    SECTION_TRANSFER,
    SECTION_WEAKNOISE,
    SE_FACTOR,
)
from .diagnostics import REPORT_COLUMNS, Report
from .exceptions import (
    ClosureBoundaryError,
    InvalidParameterError,
    LiouvilleClosureError,
    NonConvergenceError,
    SingularCollocationError,
    SteadyStateNotConvergedError,
)
from .geometry import (
    ClosedFormProvider,
    FreeSurrogateProvider,
    GeometryProvider,
    HarmonicSurrogateProvider,
    MonteCarloProvider,
    TabulatedProvider,
    identity_suite,
)
from .harmonic import HarmonicSpec, extremal_closed, kernel_closed, restart_experiment, thermo_path
from .lagrangian import LagrangianContext, discrete_action
from .models import HamiltonianModel, OscillatorModel, TbhModel
from .paths import ClosureResult, classical_closure, solve_extremal
from .pde import pde_check
from .transfer import (
    ConsistencyField,
    GridSpec,
    TransferOperator,
    appendix_b_diagnostics,
    build_transfer,
    spectrum,
    steady_state,
    trajectory,
)
from .weaknoise import om_decomposition_check, stationary_hj_quadratic, weak_noise_analysis

_LOGGER = logging.getLogger(__name__)

SUBCOMMANDS = ["geometry", "identities", "harmonic", "extremal", "closure", "propagate", "steady", "weaknoise", "pde-check", "appendix-b"]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        return format(float(value), ".12g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _indexed(name: str, values) -> list[tuple[str, float]]:
    """Flatten an array into (name[i,j], value) pairs."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return [(name, float(arr))]
    return [(f"{name}[{','.join(str(i) for i in idx)}]", float(arr[idx])) for idx in np.ndindex(arr.shape)]


def _pair_label(i: int, j: int, m: int) -> str:
    """One-based matrix index, ``12``, or ``1_2`` once indices reach two digits."""
    if m < 10:
        return f"{i + 1}{j + 1}"
    return f"{i + 1}_{j + 1}"


# ---------------------------
#   ClosureCoordinator
# ---------------------------
class ClosureCoordinator:
    """Runs subcommands of one configuration and writes their artifacts."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.output_dir = pathlib.Path(config.output)
        self.written: list[pathlib.Path] = []
        self._dispatch: dict[str, Callable[[], int]] = {
            "geometry": self.run_geometry,
            "identities": self.run_identities,
            "harmonic": self.run_harmonic,
            "extremal": self.run_extremal,
            "closure": self.run_closure,
            "propagate": self.run_propagate,
            "steady": self.run_steady,
            "weaknoise": self.run_weaknoise,
            "pde-check": self.run_pde_check,
            "appendix-b": self.run_appendix_b,
        }

    # ---------------------------
    #   option_*
    # ---------------------------
    @property
    def option_seed(self) -> int:
        return self.config.seed

    @property
    def option_delta_t(self) -> float:
        return self.config.get(SECTION_RUN, CONF_DELTA_T)

    @property
    def option_w_rev(self) -> float:
        return self.config.get(SECTION_RUN, CONF_W_REV)

    @property
    def option_workers(self) -> int:
        return self.config.get(SECTION_RUN, CONF_WORKERS)

    @property
    def option_model(self) -> str:
        return self.config.get(SECTION_MODEL, CONF_MODEL)

    @property
    def option_beta(self) -> float:
        return self.config.get(SECTION_MODEL, CONF_BETA)

    # ---------------------------
    #   builders
    # ---------------------------
    def build_model(self) -> HamiltonianModel:
        """Fine-grained Hamiltonian model named in [model]."""
        section = self.config[SECTION_MODEL]
        if self.option_model == MODEL_OSCILLATOR:
            return OscillatorModel()
        if self.option_model in (MODEL_HARMONIC, MODEL_FREE):
            raise InvalidParameterError(f"model {self.option_model!r} is a geometry surrogate without fine-grained dynamics")
        return TbhModel(section[CONF_CUTOFF], section[CONF_K_RES])

    def build_grid(self) -> GridSpec:
        section = self.config[SECTION_GRID]
        return GridSpec(tuple(section[CONF_LOWER]), tuple(section[CONF_UPPER]), tuple(section[CONF_POINTS]))

    def build_provider(self) -> GeometryProvider:
        """Geometry provider for [model], tabulated on [grid] when requested."""
        section = self.config[SECTION_MODEL]
        if self.option_model == MODEL_HARMONIC:
            return HarmonicSurrogateProvider(section[CONF_KAPPA])
        if self.option_model == MODEL_FREE:
            return FreeSurrogateProvider()
        model = self.build_model()
        if section[CONF_PROVIDER] == PROVIDER_MONTE_CARLO:
            return MonteCarloProvider(model, section[CONF_COUNT], self.option_seed, self.option_beta, section[CONF_BATCHES])
        provider = ClosedFormProvider(model, self.option_beta)
        if section[CONF_PROVIDER] == PROVIDER_TABULATED:
            return TabulatedProvider(provider, self.build_grid().axes)
        return provider

    def build_context(self) -> LagrangianContext:
        return LagrangianContext(self.build_provider(), self.option_delta_t, self.option_w_rev)

    def build_transfer(self) -> TransferOperator:
        return build_transfer(self.build_provider(), self.build_grid(), self.option_delta_t, self.config.get(SECTION_TRANSFER, CONF_N_SUB), self.option_w_rev)

    # ---------------------------
    #   write_csv
    # ---------------------------
    def write_csv(self, name: str, header: list[str], rows: Iterable[Iterable]) -> pathlib.Path:
        """Write one artifact atomically with a provenance comment line."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        target = self.output_dir / name
        handle, temp = tempfile.mkstemp(prefix=f".{name}.", dir=self.output_dir)
        try:
            with os.fdopen(handle, "w", newline="", encoding="utf-8") as stream:
                stream.write(f"# {DOMAIN} {__version__} config={self.config.sha256} seed={self.option_seed}\n")
                writer = csv.writer(stream, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_fmt(v) for v in row])
            os.replace(temp, target)
        except BaseException:
            if os.path.exists(temp):
                os.unlink(temp)
            raise
        self.written.append(target)
        _LOGGER.info("wrote %s", target)
        return target

    def write_report(self, name: str, report: Report) -> pathlib.Path:
        return self.write_csv(name, REPORT_COLUMNS, report.rows())

    def _grid_rows(self, grid: GridSpec, values: np.ndarray, prefix: tuple = ()) -> list[list]:
        return [[*prefix, *node, value] for node, value in zip(grid.nodes, values)]

    def _coord_header(self, grid: GridSpec) -> list[str]:
        return [f"lambda{i}" for i in range(grid.dim)]

    # ---------------------------
    #   run
    # ---------------------------
    def run(self, subcommand: str) -> int:
        """Run one subcommand; returns the process exit code."""
        if subcommand not in self._dispatch:
            _LOGGER.error("unknown subcommand %r (expected one of %s)", subcommand, ", ".join(SUBCOMMANDS))
            return EXIT_INVALID
        try:
            code = self._dispatch[subcommand]()
        except (NonConvergenceError, SingularCollocationError) as err:
            _LOGGER.error("%s did not converge: %s", subcommand, err)
            return EXIT_NOT_CONVERGED
        except LiouvilleClosureError as err:
            _LOGGER.error("%s failed: %s", subcommand, err)
            return EXIT_INVALID
        _LOGGER.info("%s finished with exit code %d", subcommand, code)
        return code

    @staticmethod
    def _report_code(report: Report) -> int:
        if report.passed:
            return EXIT_OK
        _LOGGER.error("%s: checks failed: %s", report.title, ", ".join(e.name for e in report.entries if not e.passed))
        return EXIT_NOT_CONVERGED

    # ---------------------------
    #   run_geometry
    # ---------------------------
    def run_geometry(self) -> int:
        """Geometry table over the [grid] nodes, one wide row per node."""
        provider = self.build_provider()
        grid = self.build_grid()
        if grid.dim != provider.m:
            raise InvalidParameterError(f"geometry table needs a {provider.m}-D grid, [grid] is {grid.dim}-D")
        m = provider.m
        pairs = [_pair_label(i, j, m) for i in range(m) for j in range(m)]
        ones = [str(i + 1) for i in range(m)]
        values_header = [
            *(f"a_{i}" for i in ones),
            *(f"g_{p}" for p in pairs),
            *(f"M_{i}" for i in ones),
            "phi",
            *(f"kmat_{p}" for p in pairs),
            *(f"h_{p}" for p in pairs),
            "il_rev_density",
        ]
        sampled = isinstance(provider, MonteCarloProvider)
        header = [*(f"lambda_{i}" for i in ones), *values_header, "invariants_ok"]
        if sampled:
            header.extend(f"se_{name}" for name in values_header)

        rows = []
        failed = 0
        for node in grid.nodes:
            pt = provider.point(node)
            row = [*node, *pt.a, *pt.g.ravel(), *pt.M, pt.phi, *pt.kmat.ravel(), *pt.h.ravel(), pt.il_rev_density]
            violations = pt.invariant_violations()
            failed += bool(violations)
            row.append(not violations)
            if sampled:
                se = pt.se
                row.extend([*se["a"], *se["g"].ravel(), *se["M"], float(se["phi"]), *se["kmat"].ravel(), *se["h"].ravel(), float(se["il_rev"])])
            rows.append(row)
        self.write_csv("geometry.csv", header, rows)

        if not failed:
            return EXIT_OK
        # 3-SE checks on every node of a sampled table fail at the nominal rate by chance.
        if sampled:
            _LOGGER.warning("%d of %d sampled nodes miss an invariant at %g standard errors", failed, grid.size, SE_FACTOR)
            return EXIT_OK
        _LOGGER.error("geometry invariants violated at %d of %d nodes", failed, grid.size)
        return EXIT_NOT_CONVERGED

    # ---------------------------
    #   run_identities
    # ---------------------------
    def run_identities(self) -> int:
        model = self.build_model()
        section = self.config[SECTION_GEOMETRY]
        report = identity_suite(
            model,
            section[CONF_LAMBDA],
            self.option_beta,
            self.config.get(SECTION_MODEL, CONF_COUNT),
            self.option_seed,
            lambda_dot=section[CONF_LAMBDA_DOT] or None,
        )
        self.write_report("identities.csv", report)
        return self._report_code(report)

    # ---------------------------
    #   run_harmonic
    # ---------------------------
    def run_harmonic(self) -> int:
        """Restart experiment, kernel slices and the thermodynamical/extremal comparison."""
        section = self.config[SECTION_HARMONIC]
        spec = HarmonicSpec(self.config.get(SECTION_MODEL, CONF_KAPPA), section[CONF_U0], self.option_delta_t)
        original, restarted = restart_experiment(spec, section[CONF_T_RESTART], section[CONF_HORIZON], section[CONF_STEP])
        offset = len(original) - len(restarted)
        rows = []
        for n, t in enumerate(original.times):
            later = restarted.points[n - offset, 0] if n >= offset else ""
            rows.append([t, original.points[n, 0], later])
        self.write_csv("fig2a.csv", ["t", "u_original", "u_restarted"], rows)

        grid = self.build_grid()
        if grid.dim != 1:
            raise InvalidParameterError("harmonic kernel slices need a one-dimensional grid")
        axis = grid.axes[0]
        rows = [[T, u, psi] for T in section[CONF_SLICE_TIMES] for u, psi in zip(axis, kernel_closed(spec, axis, T))]
        self.write_csv("fig2b.csv", ["T", "uT", "psi"], rows)

        horizon = section[CONF_EXTREMAL_HORIZON]
        times = np.linspace(0.0, horizon, int(round(horizon / section[CONF_STEP])) + 1)
        extremal = extremal_closed(spec, thermo_path(spec, horizon), horizon, times)
        self.write_csv("fig3.csv", ["t", "u_thermo", "u_extremal"], zip(times, thermo_path(spec, times), extremal))
        return EXIT_OK

    # ---------------------------
    #   run_extremal
    # ---------------------------
    def run_extremal(self) -> int:
        section = self.config[SECTION_PATHS]
        ctx = self.build_context()
        solution = solve_extremal(
            ctx,
            section[CONF_LAMBDA0],
            section[CONF_LAMBDA_END],
            section[CONF_HORIZON],
            section[CONF_N_NODES],
            section[CONF_TOLERANCE],
            section[CONF_MAX_ITER],
        )
        path = solution.path
        self.write_csv("extremal.csv", ["t", *(f"lambda{i}" for i in range(path.m))], ([t, *p] for t, p in zip(path.times, path.points)))
        summary = [
            ["action", discrete_action(ctx, path)],
            ["el_residual", solution.el_residual],
            ["newton_residual", solution.newton_residual],
            ["iterations", solution.iterations],
            ["converged", solution.converged],
        ]
        self.write_csv("extremal_summary.csv", ["key", "value"], summary)
        return EXIT_OK if solution.converged else EXIT_NOT_CONVERGED

    # ---------------------------
    #   run_closure
    # ---------------------------
    def _write_closure(self, result: ClosureResult, note: str) -> None:
        grid = result.grid
        self.write_csv("closure.csv", [*(f"lambdaT{i}" for i in range(grid.dim)), "action"], self._grid_rows(grid, result.table.ravel()))
        summary = [*_indexed("lambda_opt", result.lam_opt), ("invalid_cells", result.invalid), ("note", note)]
        self.write_csv("closure_summary.csv", ["key", "value"], summary)

    def run_closure(self) -> int:
        section = self.config[SECTION_CLOSURE]
        try:
            result = classical_closure(
                self.build_context(),
                section[CONF_LAMBDA0],
                section[CONF_HORIZON],
                self.build_grid(),
                section[CONF_N_NODES],
                section[CONF_TOLERANCE],
                self.option_workers,
            )
        except ClosureBoundaryError as err:
            _LOGGER.error("%s", err)
            self._write_closure(err.result, "minimum on grid boundary")
            return EXIT_NOT_CONVERGED
        self._write_closure(result, "")
        return EXIT_OK

    # ---------------------------
    #   run_propagate
    # ---------------------------
    def run_propagate(self) -> int:
        section = self.config[SECTION_TRANSFER]
        op = self.build_transfer()
        psi0 = ConsistencyField.delta(op.grid, section[CONF_INITIAL])
        fields = trajectory(op, psi0, section[CONF_STEPS])
        coords = self._coord_header(op.grid)
        rows = []
        for step, psi in enumerate(fields):
            rows.extend(self._grid_rows(op.grid, psi.values, (step, step * op.delta_t)))
        self.write_csv("psi.csv", ["step", "t", *coords, "psi"], rows)
        mass = [[step, step * op.delta_t, psi.l1_norm, *psi.argmax()] for step, psi in enumerate(fields)]
        self.write_csv("mass.csv", ["step", "t", "mass", *(f"argmax{i}" for i in range(op.grid.dim))], mass)
        return EXIT_OK

    # ---------------------------
    #   run_steady
    # ---------------------------
    def _write_steady(self, op: TransferOperator, psi: ConsistencyField, eigenvalue: float, iterations: int, converged: bool) -> None:
        self.write_csv("steady.csv", [*self._coord_header(op.grid), "psi"], self._grid_rows(op.grid, psi.values))
        mean, cov = psi.moments()
        summary = [
            ("eigenvalue", eigenvalue),
            ("rate_per_unit_time", op.rate(eigenvalue) if eigenvalue > 0.0 else np.nan),
            ("iterations", iterations),
            ("converged", converged),
            *_indexed("mean", mean),
            *_indexed("covariance", cov),
        ]
        self.write_csv("steady_summary.csv", ["key", "value"], summary)

    def run_steady(self) -> int:
        section = self.config[SECTION_TRANSFER]
        op = self.build_transfer()
        try:
            eigenvalue, psi, iterations = steady_state(op, seed=self.option_seed, confinement_factor=section[CONF_CONFINEMENT])
        except SteadyStateNotConvergedError as err:
            if err.field is not None:
                self._write_steady(op, err.field, err.eigenvalue, -1, False)
            raise
        self._write_steady(op, psi, eigenvalue, iterations, True)
        if section[CONF_SPECTRUM]:
            values = spectrum(op, section[CONF_SPECTRUM])
            self.write_csv("spectrum.csv", ["index", "magnitude"], enumerate(values))
        return EXIT_OK

    # ---------------------------
    #   run_weaknoise
    # ---------------------------
    def run_weaknoise(self) -> int:
        section = self.config[SECTION_WEAKNOISE]
        provider = self.build_provider()
        gauge = stationary_hj_quadratic(provider, section[CONF_ALPHA_GUESS], seed=self.option_seed)
        result = weak_noise_analysis(gauge, section[CONF_LAMBDA0], section[CONF_HORIZON], section[CONF_STEP], self.option_delta_t)
        m = gauge.m
        header = ["t", *(f"alpha{i}" for i in range(m)), *(f"thermo{i}" for i in range(m))]
        rows = ([t, *a, *b] for t, a, b in zip(result.alpha_path.times, result.alpha_path.points, result.thermo_path.points))
        self.write_csv("weaknoise.csv", header, rows)
        summary = [
            *_indexed("alpha_star", gauge.alpha_star),
            *_indexed("G", gauge.G),
            *_indexed("sigma", result.sigma),
            *_indexed("drift_eigenvalue_real", gauge.drift_eigenvalues.real),
            ("hj_sample_residual", gauge.hj_sample_residual),
        ]
        self.write_csv("weaknoise_summary.csv", ["key", "value"], summary)
        if isinstance(provider, HarmonicSurrogateProvider) and provider.kappa > 0.0:
            spec = HarmonicSpec(provider.kappa, float(result.alpha_path.points[0, 0]), self.option_delta_t)
            report = om_decomposition_check(gauge, spec, section[CONF_HORIZON])
            self.write_report("weaknoise_om.csv", report)
            return self._report_code(report)
        return EXIT_OK

    # ---------------------------
    #   run_pde_check
    # ---------------------------
    def run_pde_check(self) -> int:
        section = self.config[SECTION_PDE]
        report = pde_check(
            self.build_provider(),
            self.build_grid(),
            self.option_delta_t,
            section[CONF_INITIAL],
            width=section[CONF_WIDTH],
            n_sub_list=section[CONF_N_SUB_LIST],
            dt_pde=section[CONF_DT_PDE],
            decay_start=section[CONF_DECAY_START],
            decay_end=section[CONF_DECAY_END],
            w_rev=self.option_w_rev,
        )
        self.write_report("pde_check.csv", report)
        return self._report_code(report)

    # ---------------------------
    #   run_appendix_b
    # ---------------------------
    def run_appendix_b(self) -> int:
        section = self.config[SECTION_TRANSFER]
        report = appendix_b_diagnostics(self.build_transfer(), section[CONF_TRIALS], self.option_seed, section[CONF_CONFINEMENT])
        self.write_report("appendix_b.csv", report)
        return self._report_code(report)
