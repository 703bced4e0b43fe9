"""Tests for configuration parsing.

Every problem in a file is reported with its line number in one pass;
omitted keys take their defaults and every shipped preset validates.
"""

from pathlib import Path

import pytest

from liouville_closure.config import SECTION_KEYS, parse_config
from liouville_closure.exceptions import ConfigValidationError

PRESETS = Path(__file__).resolve().parent.parent / "presets"


def _errors(text: str) -> list[tuple[int, str]]:
    with pytest.raises(ConfigValidationError) as err:
        parse_config(text)
    return err.value.errors


def test_single_value() -> None:
    config = parse_config("[model]\nkappa = 1.0\n")
    assert config.get("model", "kappa") == 1.0
    assert isinstance(config.get("model", "kappa"), float)


def test_defaults_fill_every_section() -> None:
    config = parse_config("")
    for section, keys in SECTION_KEYS.items():
        assert set(config[section]) == set(keys)
    assert config.seed == 0
    assert config.get("run", "delta_t") == 1.0
    assert config.get("closure", "n_nodes") == 200


def test_lists_and_comments() -> None:
    text = "# header\n[grid]\nlower = -7, -7   # both axes\nupper = 7.0,7.0\npoints = 57, 57\n"
    config = parse_config(text)
    assert config.get("grid", "lower") == [-7.0, -7.0]
    assert config.get("grid", "points") == [57, 57]


def test_range_error_names_line() -> None:
    errors = _errors("[run]\nseed = 1\n[model]\nbeta = -1\n")
    assert len(errors) == 1
    line, message = errors[0]
    assert line == 4
    assert "beta" in message


@pytest.mark.parametrize("value", ["nan", "inf", "abc", ""])
def test_non_finite_and_malformed_numbers(value) -> None:
    assert _errors(f"[run]\ndelta_t = {value}\n")[0][0] == 2


def test_all_errors_reported_together() -> None:
    text = "\n".join(
        [
            "orphan = 1",  # 1: before any header
            "[nowhere]",  # 2: unknown section
            "[model]",
            "colour = blue",  # 4: unknown key
            "beta = 2",
            "beta = 3",  # 6: duplicate
            "this is not an entry",  # 7: malformed
            "[grid]",
            "points = 8",  # 9: below the minimum
        ]
    )
    assert [line for line, _ in _errors(text)] == [1, 2, 4, 6, 7, 9]


def test_cross_section_checks() -> None:
    errors = _errors("[grid]\nlower = -1, -1\nupper = 1\npoints = 32, 32\n")
    assert "same length" in errors[0][1]
    errors = _errors("[grid]\nlower = 1\nupper = -1\n")
    assert "below" in errors[0][1]
    errors = _errors("[harmonic]\nt_restart = 6\nhorizon = 5\n")
    assert errors[0][0] == 2
    errors = _errors("[pde]\ndecay_start = 6\ndecay_end = 4\n")
    assert errors[0][0] == 3
    errors = _errors("[paths]\nlambda0 = 1, 0\nlambda_end = 1\n")
    assert errors[0][0] == 3


def test_cross_checks_run_alongside_line_errors() -> None:
    text = "[model]\nbeta = -1\n[grid]\nlower = -1, -1\nupper = 1\npoints = 32, 32\n[pde]\ndecay_start = 6\ndecay_end = 4\n"
    errors = _errors(text)
    assert [line for line, _ in errors] == [2, 6, 9]
    assert "beta" in errors[0][1]
    assert "same length" in errors[1][1]
    assert "decay_end" in errors[2][1]


def test_cross_check_skipped_for_failed_key() -> None:
    errors = _errors("[harmonic]\nt_restart = -2\nhorizon = 5\n[grid]\nlower = -1, -1\n")
    assert [line for line, _ in errors] == [2, 5]
    assert "t_restart" in errors[0][1]
    assert "same length" in errors[1][1]


def test_choices_are_enforced() -> None:
    assert _errors("[model]\nmodel = pendulum\n")[0][0] == 2
    assert _errors("[model]\nprovider = guess\n")[0][0] == 2
    assert _errors("[pde]\nn_sub_list = 10\n")[0][0] == 2


def test_hash_tracks_text() -> None:
    a = parse_config("[run]\nseed = 1\n")
    b = parse_config("[run]\nseed = 1\n")
    c = parse_config("[run]\nseed = 1 \n")
    assert a.sha256 == b.sha256
    assert a.sha256 != c.sha256
    assert len(a.sha256) == 64


def test_overrides() -> None:
    config = parse_config("[run]\nseed = 1\noutput = here\n")
    changed = config.override(output="there", seed=9)
    assert (changed.output, changed.seed) == ("there", 9)
    assert (config.output, config.seed) == ("here", 1)
    assert config.override().sections == config.sections
    with pytest.raises(ConfigValidationError):
        config.override(seed=-1)


@pytest.mark.parametrize("preset", sorted(p.name for p in PRESETS.glob("*.cfg")))
def test_presets_validate(preset) -> None:
    parse_config((PRESETS / preset).read_text(encoding="utf-8"))


def test_fig2_preset_values() -> None:
    config = parse_config((PRESETS / "fig2.cfg").read_text(encoding="utf-8"))
    assert config.get("model", "kappa") == 1.0
    assert config.get("harmonic", "u0") == 1.0
    assert config.get("run", "delta_t") == 1.0
    assert config.get("harmonic", "t_restart") == 1.5
