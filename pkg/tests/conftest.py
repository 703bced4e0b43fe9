"""Test fixtures.

The package is imported straight from the repository root so the tests run
without an install step. Shared models, providers and grids are built here;
the one-shot warning registry is cleared around every test so warnings are
observable with ``caplog``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from liouville_closure import helper  # noqa: E402
from liouville_closure.geometry import ClosedFormProvider, HarmonicSurrogateProvider  # noqa: E402
from liouville_closure.lagrangian import LagrangianContext  # noqa: E402
from liouville_closure.models import OscillatorModel, TbhModel  # noqa: E402
from liouville_closure.transfer import GridSpec  # noqa: E402

PRESETS = ROOT / "presets"


@pytest.fixture(autouse=True)
def _reset_warned_set():
    """Clear the per-process one-shot warning dedup."""
    helper._WARNED.clear()
    yield
    helper._WARNED.clear()


@pytest.fixture
def oscillator() -> OscillatorModel:
    return OscillatorModel()


@pytest.fixture
def tbh() -> TbhModel:
    return TbhModel(cutoff=3, k_res=1)


@pytest.fixture
def oscillator_provider(oscillator) -> ClosedFormProvider:
    return ClosedFormProvider(oscillator, beta=1.0)


@pytest.fixture
def harmonic_provider() -> HarmonicSurrogateProvider:
    return HarmonicSurrogateProvider(1.0)


@pytest.fixture
def harmonic_ctx(harmonic_provider) -> LagrangianContext:
    return LagrangianContext(harmonic_provider, 1.0)


@pytest.fixture
def harmonic_grid() -> GridSpec:
    """[-4, 4] with h = 0.02."""
    return GridSpec((-4.0,), (4.0,), (401,))


@pytest.fixture
def oscillator_ctx(oscillator_provider) -> LagrangianContext:
    return LagrangianContext(oscillator_provider, 1.0)
