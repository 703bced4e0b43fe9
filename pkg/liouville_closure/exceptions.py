"""Exceptions for Liouville closure."""

from __future__ import annotations

from typing import Any


class LiouvilleClosureError(Exception):
    """Base error of the library."""


class InvalidParameterError(LiouvilleClosureError, ValueError):
    """Parameter outside its admissible range."""


class NonFiniteStateError(LiouvilleClosureError):
    """Model evaluator produced a non-finite value."""


class UnsupportedModelError(LiouvilleClosureError):
    """Model lacks the structure an operation requires."""


class DegenerateGeometryError(LiouvilleClosureError):
    """Fisher metric is numerically singular."""

    def __init__(self, message: str, direction: Any = None) -> None:
        super().__init__(message)
        self.direction = direction


class GeometryOutOfRangeError(LiouvilleClosureError):
    """Tabulated geometry requested outside its table."""


class ProviderInconsistencyError(LiouvilleClosureError):
    """Geometry violates phi >= M g^-1 M beyond tolerance."""


class SingularCollocationError(LiouvilleClosureError):
    """Collocation Jacobian is singular."""


class ClosureBoundaryError(LiouvilleClosureError):
    """Endpoint-table argmin lies on the grid boundary."""

    def __init__(self, message: str, result: Any = None) -> None:
        super().__init__(message)
        self.result = result


class HarmonicOverflowError(LiouvilleClosureError):
    """kappa*T too large for the closed forms."""


class GridMismatchError(LiouvilleClosureError):
    """Field and operator live on different grids."""


class NonConvergenceError(LiouvilleClosureError):
    """Iteration did not converge."""


class SteadyStateNotConvergedError(NonConvergenceError):
    """Power iteration exhausted max_iter."""

    def __init__(self, message: str, gap: float, field: Any = None, eigenvalue: float = float("nan")) -> None:
        super().__init__(message)
        self.gap = gap
        self.field = field
        self.eigenvalue = eigenvalue


class FixedPointNotFoundError(NonConvergenceError):
    """Newton search for the fixed point failed."""


class BranchSelectionError(LiouvilleClosureError):
    """No Hurwitz branch of the quadratic gauge exists."""


class NonHurwitzDriftError(LiouvilleClosureError):
    """Linearised drift is not Hurwitz."""


class WrongBranchError(LiouvilleClosureError):
    """Drift integration blew up."""


class DegenerateCorrectionError(LiouvilleClosureError):
    """I + sigma G is singular."""


class UnsupportedCurvatureError(LiouvilleClosureError):
    """Curvature term would be required but is not supported."""


class StabilityViolationError(LiouvilleClosureError):
    """Explicit time step violates the stability bound."""

    def __init__(self, message: str, suggested: float) -> None:
        super().__init__(message)
        self.suggested = suggested


class ConfigValidationError(LiouvilleClosureError):
    """Configuration text failed validation."""

    def __init__(self, errors: list[tuple[int, str]]) -> None:
        self.errors = errors
        super().__init__("; ".join(f"line {line}: {msg}" for line, msg in errors))
