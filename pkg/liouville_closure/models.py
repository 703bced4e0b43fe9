"""Fine-grained Hamiltonian models with exactly sampleable trial densities.

A model supplies the resolved variables ``A(x)``, their Liouville images
``LA(x) = {A, H}``, the conserved energy ``E(x)`` and the Gaussian trial
density ``p(x) ~ exp(lambda.A - beta E)``. Both shipped models have linear
resolved variables and a quadratic energy, so the trial density is Gaussian
with mean ``W^-1 P^T lambda / beta`` and covariance ``W^-1 / beta`` where
``E = x.W.x / 2`` and ``A = P x``.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod

import numpy as np

from .const import (
    DEFAULT_CUTOFF,
    DEFAULT_K_RES,
    ENERGY_TAU,
    FD_STEP_BRACKET,
    FINE_STEP,
    MAX_CUTOFF,
)
from .exceptions import InvalidParameterError, NonFiniteStateError
from .helper import as_vector, central_gradient, central_jacobian, rk4_step

_LOGGER = logging.getLogger(__name__)


# ---------------------------
#   HamiltonianModel
# ---------------------------
class HamiltonianModel(ABC):
    """Contract for a symplectic fine-grained system."""

    n_fine: int
    m: int
    name: str = "model"

    @property
    @abstractmethod
    def resolved_matrix(self) -> np.ndarray:
        """Linear map P with A(x) = P x."""

    @property
    @abstractmethod
    def energy_matrix(self) -> np.ndarray:
        """Symmetric W with E(x) = x.W.x / 2."""

    @abstractmethod
    def poisson_matrix(self) -> np.ndarray:
        """Constant Poisson tensor J of the fine state."""

    @abstractmethod
    def flow(self, x: np.ndarray) -> np.ndarray:
        """Analytic vector field J grad H, vectorised over leading axes."""

    @abstractmethod
    def hamiltonian(self, x: np.ndarray) -> np.ndarray:
        """Hamiltonian H(x)."""

    def resolved(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.resolved_matrix.T

    def energy(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.energy_matrix, x)

    def liouville(self, x: np.ndarray) -> np.ndarray:
        """LA = {A, H}; equals P f(x) for linear resolved variables."""
        return self.flow(x) @ self.resolved_matrix.T

    # ---------------------------
    #   liouville_squared
    # ---------------------------
    def liouville_squared(self, x: np.ndarray) -> np.ndarray:
        """L^2 A by central differences of LA along the flow."""
        x = np.asarray(x, dtype=float)
        f = self.flow(x)
        eps = FD_STEP_BRACKET
        return (self.liouville(x + eps * f) - self.liouville(x - eps * f)) / (2.0 * eps)

    # ---------------------------
    #   trial_moments
    # ---------------------------
    def trial_moments(self, lam, beta: float) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the Gaussian trial density at (lambda, beta)."""
        lam = as_vector(lam, "lambda")
        if lam.size != self.m:
            raise InvalidParameterError(f"lambda has {lam.size} components, model resolves {self.m}")
        if not np.all(np.isfinite(lam)):
            raise InvalidParameterError("lambda must be finite")
        if not beta > 0.0:
            raise InvalidParameterError(f"beta must be positive for a normalisable trial density, got {beta}")
        w_inv = np.linalg.inv(self.energy_matrix)
        mean = w_inv @ self.resolved_matrix.T @ lam / beta
        cov = w_inv / beta
        return mean, 0.5 * (cov + cov.T)


# ---------------------------
#   OscillatorModel
# ---------------------------
class OscillatorModel(HamiltonianModel):
    """Harmonic oscillator with x = (q, p) fully resolved."""

    n_fine = 2
    m = 2
    name = "oscillator"

    _P = np.eye(2)
    _W = np.eye(2)
    _J = np.array([[0.0, 1.0], [-1.0, 0.0]])

    @property
    def resolved_matrix(self) -> np.ndarray:
        return self._P

    @property
    def energy_matrix(self) -> np.ndarray:
        return self._W

    def poisson_matrix(self) -> np.ndarray:
        return self._J

    def flow(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1], -x[..., 0]], axis=-1)

    def hamiltonian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * (x[..., 0] ** 2 + x[..., 1] ** 2)

    def liouville_squared(self, x: np.ndarray) -> np.ndarray:
        return -np.asarray(x, dtype=float)


# ---------------------------
#   TbhModel
# ---------------------------
class TbhModel(HamiltonianModel):
    """Spectrally truncated Burgers-Hopf model.

    The fine state interleaves real and imaginary parts,
    ``x = (Re u1, Im u1, ..., Re uL, Im uL)``; ``u0 = 0`` and
    ``u_-k = conj(u_k)`` hold by construction.
    """

    name = "tbh"

    def __init__(self, cutoff: int = DEFAULT_CUTOFF, k_res: int = DEFAULT_K_RES) -> None:
        if not 1 <= cutoff <= MAX_CUTOFF:
            raise InvalidParameterError(f"cutoff must lie in [1, {MAX_CUTOFF}], got {cutoff}")
        if not 1 <= k_res <= cutoff:
            raise InvalidParameterError(f"k_res must lie in [1, cutoff], got {k_res}")
        self.cutoff = int(cutoff)
        self.k_res = int(k_res)
        self.n_fine = 2 * self.cutoff
        self.m = 2 * self.k_res
        self.wavenumbers = np.arange(1, self.cutoff + 1)

        self._P = np.eye(self.n_fine)[: self.m]
        self._W = 2.0 * np.eye(self.n_fine)
        blocks = [np.array([[0.0, 0.5 * k], [-0.5 * k, 0.0]]) for k in self.wavenumbers]
        self._J = np.zeros((self.n_fine, self.n_fine))
        for i, block in enumerate(blocks):
            self._J[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = block

        # Convolution index pairs (p, k - p) for each k >= 1 with |p|, |k - p| <= cutoff.
        self._pairs = []
        for k in self.wavenumbers:
            p = np.arange(k - self.cutoff, self.cutoff + 1)
            self._pairs.append((p + self.cutoff, k - p + self.cutoff))

    @property
    def resolved_matrix(self) -> np.ndarray:
        return self._P

    @property
    def energy_matrix(self) -> np.ndarray:
        return self._W

    def poisson_matrix(self) -> np.ndarray:
        return self._J

    # ---------------------------
    #   spectrum
    # ---------------------------
    def spectrum(self, x: np.ndarray) -> np.ndarray:
        """Full complex spectrum indexed k + cutoff for k in [-cutoff, cutoff]."""
        x = np.asarray(x, dtype=float)
        positive = x[..., 0::2] + 1j * x[..., 1::2]
        zero = np.zeros(x.shape[:-1] + (1,), dtype=complex)
        return np.concatenate([np.conj(positive[..., ::-1]), zero, positive], axis=-1)

    def _half_square(self, full: np.ndarray) -> np.ndarray:
        """Galerkin-projected u^2 / 2 for k = 1..cutoff."""
        out = np.empty(full.shape[:-1] + (self.cutoff,), dtype=complex)
        for i, (left, right) in enumerate(self._pairs):
            out[..., i] = 0.5 * np.sum(full[..., left] * full[..., right], axis=-1)
        return out

    # ---------------------------
    #   tendency_spectrum
    # ---------------------------
    def tendency_spectrum(self, x: np.ndarray) -> np.ndarray:
        """du_k/dt over the full index range."""
        positive = -1j * self.wavenumbers * self._half_square(self.spectrum(x))
        zero = np.zeros(positive.shape[:-1] + (1,), dtype=complex)
        return np.concatenate([np.conj(positive[..., ::-1]), zero, positive], axis=-1)

    def flow(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        tendency = -1j * self.wavenumbers * self._half_square(self.spectrum(x))
        out = np.empty(x.shape)
        out[..., 0::2] = tendency.real
        out[..., 1::2] = tendency.imag
        return out

    def hamiltonian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        full = self.spectrum(x)
        positive = full[..., self.cutoff + 1 :]
        return (2.0 / 3.0) * np.real(np.sum(self._half_square(full) * np.conj(positive), axis=-1))


# ---------------------------
#   sample_trial
# ---------------------------
def sample_trial(model: HamiltonianModel, lam, beta: float, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` exact samples of the trial density at (lambda, beta)."""
    if count < 1:
        raise InvalidParameterError(f"count must be at least 1, got {count}")
    mean, cov = model.trial_moments(lam, beta)
    chol = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    return mean + rng.standard_normal((int(count), model.n_fine)) @ chol.T


def _checked(values: np.ndarray, what: str, model: HamiltonianModel) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonFiniteStateError(f"{model.name}: non-finite {what}")
    return values


# ---------------------------
#   bracket_by_differences
# ---------------------------
def bracket_by_differences(model: HamiltonianModel, fn, x: np.ndarray, step: float = FD_STEP_BRACKET) -> np.ndarray:
    """{F, H} = (grad F)^T J grad H with both gradients by central differences."""
    x = as_vector(x, "x")
    grad_h = central_gradient(lambda y: float(model.hamiltonian(y)), x, step)
    grad_f = np.atleast_2d(central_jacobian(lambda y: np.atleast_1d(fn(y)), x, step))
    return grad_f @ model.poisson_matrix() @ grad_h


# ---------------------------
#   poisson_bracket_check
# ---------------------------
def poisson_bracket_check(model: HamiltonianModel, x, tol: float) -> bool:
    """Return True iff the analytic LA(x) equals {A, H} within ``tol``."""
    if not tol > 0.0:
        raise InvalidParameterError("tol must be positive")
    x = as_vector(x, "x")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("x must be finite")
    analytic = _checked(model.liouville(x), "Liouville image", model)
    numeric = _checked(bracket_by_differences(model, model.resolved, x), "bracket", model)
    error = float(np.max(np.abs(analytic - numeric)))
    _LOGGER.debug("%s: bracket error %.3e at tol %.1e", model.name, error, tol)
    return error <= tol


# ---------------------------
#   energy_drift
# ---------------------------
def energy_drift(model: HamiltonianModel, x, tau: float = ENERGY_TAU, step: float = FINE_STEP) -> float:
    """Relative energy change after integrating the fine flow for ``tau``."""
    x = as_vector(x, "x")
    e0 = float(model.energy(x))
    y = x.copy()
    for _ in range(int(round(tau / step))):
        y = rk4_step(model.flow, y, step)
    _checked(y, "integrated state", model)
    return abs(float(model.energy(y)) - e0) / abs(e0)
