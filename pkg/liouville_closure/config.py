"""Run configuration: line-oriented ``key = value`` text validated with voluptuous."""

from __future__ import annotations

import hashlib
import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any

import voluptuous as vol

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
    CONF_OUTPUT,
    CONF_POINTS,
    CONF_PROVIDER,
    CONF_SEED,
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
    DEFAULT_ALPHA_GUESS,
    DEFAULT_BATCHES,
    DEFAULT_BETA,
    DEFAULT_CLOSURE_HORIZON,
    DEFAULT_CLOSURE_NODES,
    DEFAULT_CONFINEMENT,
    DEFAULT_COUNT,
    DEFAULT_CUTOFF,
    DEFAULT_DECAY_END,
    DEFAULT_DECAY_START,
    DEFAULT_DELTA_T,
    DEFAULT_DRIFT_STEP,
    DEFAULT_DT_PDE,
    DEFAULT_EL_TOLERANCE,
    DEFAULT_EXTREMAL_HORIZON,
    DEFAULT_FIGURE_STEP,
    DEFAULT_HORIZON,
    DEFAULT_INITIAL,
    DEFAULT_K_RES,
    DEFAULT_KAPPA,
    DEFAULT_LAMBDA,
    DEFAULT_LAMBDA0,
    DEFAULT_LAMBDA_DOT,
    DEFAULT_LAMBDA_END,
    DEFAULT_LOWER,
    DEFAULT_MODEL,
    DEFAULT_N_NODES,
    DEFAULT_N_SUB,
    DEFAULT_N_SUB_LIST,
    DEFAULT_NEWTON_MAX_ITER,
    DEFAULT_OUTPUT,
    DEFAULT_POINTS,
    DEFAULT_PROVIDER,
    DEFAULT_SEED,
    DEFAULT_SLICE_TIMES,
    DEFAULT_SPECTRUM,
    DEFAULT_STEPS,
    DEFAULT_T_RESTART,
    DEFAULT_TRIALS,
    DEFAULT_U0,
    DEFAULT_UPPER,
    DEFAULT_W_REV,
    DEFAULT_WEAKNOISE_HORIZON,
    DEFAULT_WIDTH,
    DEFAULT_WORKERS,
    MAX_CUTOFF,
    MIN_GRID_POINTS,
    MIN_N_NODES,
    MIN_TRIALS,
    MODELS,
    PROVIDERS,
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
)
from .exceptions import ConfigValidationError

_LOGGER = logging.getLogger(__name__)

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_-]*)\s*\]$")
_ENTRY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


# ---------------------------
#   Validators
# ---------------------------
def _finite(value: float) -> float:
    if not math.isfinite(value):
        raise vol.Invalid("must be finite")
    return value


def _split(value: Any) -> list:
    """Comma-separated list; typed lists pass through."""
    if isinstance(value, (list, tuple)):
        return list(value)
    if not isinstance(value, str):
        raise vol.Invalid("expected a comma-separated list")
    return [item.strip() for item in value.split(",") if item.strip()]


def _number(**bounds) -> vol.All:
    if bounds:
        return vol.All(vol.Coerce(float), _finite, vol.Range(**bounds))
    return vol.All(vol.Coerce(float), _finite)


def _integer(**bounds) -> vol.All:
    return vol.All(vol.Coerce(int), vol.Range(**bounds))


def _numbers(**bounds) -> vol.All:
    return vol.All(_split, [_number(**bounds)])


def _non_empty(value: list) -> list:
    if not value:
        raise vol.Invalid("list must not be empty")
    return value


FLOAT = _number()
POSITIVE = _number(min=0.0, min_included=False)
NON_NEGATIVE = _number(min=0.0)
FLOATS = vol.All(_numbers(), _non_empty)
POSITIVES = vol.All(_numbers(min=0.0, min_included=False), _non_empty)

SECTION_KEYS: dict[str, dict[str, tuple[Any, Any]]] = {
    SECTION_RUN: {
        CONF_SEED: (_integer(min=0), DEFAULT_SEED),
        CONF_OUTPUT: (vol.All(str, vol.Length(min=1)), DEFAULT_OUTPUT),
        CONF_WORKERS: (_integer(min=1), DEFAULT_WORKERS),
        CONF_DELTA_T: (POSITIVE, DEFAULT_DELTA_T),
        CONF_W_REV: (NON_NEGATIVE, DEFAULT_W_REV),
    },
    SECTION_MODEL: {
        CONF_MODEL: (vol.In(MODELS), DEFAULT_MODEL),
        CONF_PROVIDER: (vol.In(PROVIDERS), DEFAULT_PROVIDER),
        CONF_BETA: (POSITIVE, DEFAULT_BETA),
        CONF_CUTOFF: (_integer(min=1, max=MAX_CUTOFF), DEFAULT_CUTOFF),
        CONF_K_RES: (_integer(min=1, max=MAX_CUTOFF), DEFAULT_K_RES),
        CONF_KAPPA: (NON_NEGATIVE, DEFAULT_KAPPA),
        CONF_COUNT: (_integer(min=1), DEFAULT_COUNT),
        CONF_BATCHES: (_integer(min=2), DEFAULT_BATCHES),
    },
    SECTION_GRID: {
        CONF_LOWER: (FLOATS, DEFAULT_LOWER),
        CONF_UPPER: (FLOATS, DEFAULT_UPPER),
        CONF_POINTS: (vol.All(_split, [_integer(min=MIN_GRID_POINTS)], _non_empty), DEFAULT_POINTS),
    },
    SECTION_GEOMETRY: {
        CONF_LAMBDA: (FLOATS, DEFAULT_LAMBDA),
        CONF_LAMBDA_DOT: (_numbers(), DEFAULT_LAMBDA_DOT),
    },
    SECTION_HARMONIC: {
        CONF_U0: (FLOAT, DEFAULT_U0),
        CONF_T_RESTART: (POSITIVE, DEFAULT_T_RESTART),
        CONF_HORIZON: (POSITIVE, DEFAULT_HORIZON),
        CONF_SLICE_TIMES: (POSITIVES, DEFAULT_SLICE_TIMES),
        CONF_EXTREMAL_HORIZON: (POSITIVE, DEFAULT_EXTREMAL_HORIZON),
        CONF_STEP: (POSITIVE, DEFAULT_FIGURE_STEP),
    },
    SECTION_PATHS: {
        CONF_LAMBDA0: (FLOATS, DEFAULT_LAMBDA0),
        CONF_LAMBDA_END: (FLOATS, DEFAULT_LAMBDA_END),
        CONF_HORIZON: (POSITIVE, DEFAULT_EXTREMAL_HORIZON),
        CONF_N_NODES: (_integer(min=MIN_N_NODES), DEFAULT_N_NODES),
        CONF_TOLERANCE: (POSITIVE, DEFAULT_EL_TOLERANCE),
        CONF_MAX_ITER: (_integer(min=1), DEFAULT_NEWTON_MAX_ITER),
    },
    SECTION_CLOSURE: {
        CONF_LAMBDA0: (FLOATS, DEFAULT_LAMBDA0),
        CONF_HORIZON: (POSITIVE, DEFAULT_CLOSURE_HORIZON),
        CONF_N_NODES: (_integer(min=MIN_N_NODES), DEFAULT_CLOSURE_NODES),
        CONF_TOLERANCE: (POSITIVE, DEFAULT_EL_TOLERANCE),
    },
    SECTION_TRANSFER: {
        CONF_N_SUB: (_integer(min=1), DEFAULT_N_SUB),
        CONF_STEPS: (_integer(min=0), DEFAULT_STEPS),
        CONF_INITIAL: (FLOATS, DEFAULT_INITIAL),
        CONF_TRIALS: (_integer(min=MIN_TRIALS), DEFAULT_TRIALS),
        CONF_CONFINEMENT: (POSITIVE, DEFAULT_CONFINEMENT),
        CONF_SPECTRUM: (_integer(min=0), DEFAULT_SPECTRUM),
    },
    SECTION_WEAKNOISE: {
        CONF_ALPHA_GUESS: (FLOATS, DEFAULT_ALPHA_GUESS),
        CONF_LAMBDA0: (FLOATS, DEFAULT_LAMBDA0),
        CONF_HORIZON: (POSITIVE, DEFAULT_WEAKNOISE_HORIZON),
        CONF_STEP: (POSITIVE, DEFAULT_DRIFT_STEP),
    },
    SECTION_PDE: {
        CONF_DT_PDE: (POSITIVE, DEFAULT_DT_PDE),
        CONF_N_SUB_LIST: (vol.All(_split, [_integer(min=1)], vol.Length(min=2)), DEFAULT_N_SUB_LIST),
        CONF_WIDTH: (POSITIVE, DEFAULT_WIDTH),
        CONF_INITIAL: (FLOATS, DEFAULT_INITIAL),
        CONF_DECAY_START: (NON_NEGATIVE, DEFAULT_DECAY_START),
        CONF_DECAY_END: (POSITIVE, DEFAULT_DECAY_END),
    },
}

SECTION_SCHEMAS = {
    section: vol.Schema({vol.Optional(key, default=default): validator for key, (validator, default) in keys.items()})
    for section, keys in SECTION_KEYS.items()
}


# ---------------------------
#   RunConfig
# ---------------------------
@dataclass(frozen=True)
class RunConfig:
    """Validated settings of every section plus the hash of the source text."""

    sections: dict[str, dict[str, Any]]
    sha256: str
    lines: dict[tuple[str, str], int] = field(default_factory=dict, compare=False, repr=False)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    def get(self, section: str, key: str) -> Any:
        return self.sections[section][key]

    @property
    def seed(self) -> int:
        return self.sections[SECTION_RUN][CONF_SEED]

    @property
    def output(self) -> str:
        return self.sections[SECTION_RUN][CONF_OUTPUT]

    def override(self, output: str | None = None, seed: int | None = None) -> RunConfig:
        """Copy with the command-line overrides applied."""
        run = dict(self.sections[SECTION_RUN])
        if output is not None:
            run[CONF_OUTPUT] = output
        if seed is not None:
            if seed < 0:
                raise ConfigValidationError([(0, f"seed must be non-negative, got {seed}")])
            run[CONF_SEED] = int(seed)
        return replace(self, sections={**self.sections, SECTION_RUN: run})


def _cross_checks(
    sections: dict[str, dict[str, Any]],
    lines: dict[tuple[str, str], int],
    failed: frozenset[tuple[str, str]] = frozenset(),
) -> list[tuple[int, str]]:
    """Checks spanning several keys; a check touching a key that failed on its own line is skipped."""

    def _valid(section: str, *keys: str) -> bool:
        return not any((section, key) in failed for key in keys)

    errors = []
    grid = sections[SECTION_GRID]
    grid_line = lines.get((SECTION_GRID, CONF_POINTS), lines.get((SECTION_GRID, CONF_LOWER), 0))
    if _valid(SECTION_GRID, CONF_LOWER, CONF_UPPER, CONF_POINTS):
        if not len(grid[CONF_LOWER]) == len(grid[CONF_UPPER]) == len(grid[CONF_POINTS]):
            errors.append((grid_line, "grid.lower, grid.upper and grid.points must have the same length"))
        elif any(lo >= hi for lo, hi in zip(grid[CONF_LOWER], grid[CONF_UPPER])):
            errors.append((grid_line, "grid.lower must be below grid.upper"))
    paths = sections[SECTION_PATHS]
    if _valid(SECTION_PATHS, CONF_LAMBDA0, CONF_LAMBDA_END) and len(paths[CONF_LAMBDA0]) != len(paths[CONF_LAMBDA_END]):
        errors.append((lines.get((SECTION_PATHS, CONF_LAMBDA_END), 0), "paths.lambda0 and paths.lambda_end must have the same length"))
    pde = sections[SECTION_PDE]
    if _valid(SECTION_PDE, CONF_DECAY_START, CONF_DECAY_END) and pde[CONF_DECAY_START] >= pde[CONF_DECAY_END]:
        errors.append((lines.get((SECTION_PDE, CONF_DECAY_END), 0), "pde.decay_end must exceed pde.decay_start"))
    harmonic = sections[SECTION_HARMONIC]
    if _valid(SECTION_HARMONIC, CONF_T_RESTART, CONF_HORIZON) and harmonic[CONF_T_RESTART] >= harmonic[CONF_HORIZON]:
        errors.append((lines.get((SECTION_HARMONIC, CONF_T_RESTART), 0), "harmonic.t_restart must lie before harmonic.horizon"))
    return errors


# ---------------------------
#   parse_config
# ---------------------------
def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text, collecting every error with its line number."""
    errors: list[tuple[int, str]] = []
    values: dict[str, dict[str, Any]] = {section: {} for section in SECTION_KEYS}
    lines: dict[tuple[str, str], int] = {}
    failed: set[tuple[str, str]] = set()
    section: str | None = None

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1)
            if section not in SECTION_KEYS:
                errors.append((number, f"unknown section [{section}]"))
            continue
        entry = _ENTRY_RE.match(line)
        if not entry:
            errors.append((number, f"expected 'key = value', got {line!r}"))
            continue
        key, value = entry.group(1), entry.group(2).strip()
        if section is None:
            errors.append((number, f"key {key!r} appears before any [section] header"))
            continue
        if section not in SECTION_KEYS:
            continue
        if key not in SECTION_KEYS[section]:
            errors.append((number, f"unknown key {key!r} in [{section}]"))
            continue
        if (section, key) in lines:
            errors.append((number, f"duplicate key {key!r} in [{section}] (first on line {lines[(section, key)]})"))
            continue
        lines[(section, key)] = number
        try:
            values[section][key] = vol.Schema(SECTION_KEYS[section][key][0])(value)
        except vol.Invalid as err:
            failed.add((section, key))
            errors.append((number, f"{section}.{key} = {value!r}: {err.msg}"))

    # Keys that failed fall back to their defaults so the remaining cross checks still run.
    sections = {name: SECTION_SCHEMAS[name](given) for name, given in values.items()}
    errors.extend(_cross_checks(sections, lines, frozenset(failed)))
    if errors:
        for number, message in errors:
            _LOGGER.debug("config line %d: %s", number, message)
        raise ConfigValidationError(errors)

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RunConfig(sections=sections, sha256=digest, lines=lines)
