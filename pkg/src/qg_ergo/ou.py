"""
Exact sampling of the stochastic convolution ``Z(t) = int_0^t S(t-s) sqrt(Q) dW(s)``.

Mode by mode ``Z_k`` is a scalar Ornstein-Uhlenbeck process with drift
``lambda_k < 0``; its transition over ``dt`` is Gaussian with mean
``exp(lambda_k dt) Z_k`` and variance ``alpha_k^2 (1 - exp(2 lambda_k dt)) / (2 |lambda_k|)``.
The kernel decays, ``exp(lambda_k (t - s))``, consistent with
``S(t) e_k = exp(lambda_k t) e_k``.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import spectral
from .errors import DomainError, InsufficientSamplesError
from .noise import NoiseSpec, abs_eigenvalues
from .rng import keyed_normals

__all__ = [
    "OUState",
    "ou_transition_coefficients",
    "to_table_order",
    "ou_step",
    "stationary_variance",
    "sup_mean_square_Z",
    "MIN_PATHS",
]

MIN_PATHS = 100


@dataclass(frozen=True)
class OUState:
    z: np.ndarray
    t: float
    spec: NoiseSpec
    nu: float
    step: int = 0

    @classmethod
    def initial(cls, spec, nu):
        return cls(np.zeros((spec.N, spec.N)), 0.0, spec, nu, 0)

    def __post_init__(self):
        z = spectral.as_field(self.z, self.spec.N)
        object.__setattr__(self, "z", z)
        if self.t < 0:
            raise DomainError(f"time must be >= 0, got {self.t}")


def ou_transition_coefficients(lam, alpha, dt):
    """
    Decay factor and noise amplitude of the exact transition.

    ``lam`` holds (negative) rates on any shape; ``alpha`` broadcasts to it.
    """
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    lam = np.asarray(lam, dtype=float)
    decay = np.exp(lam * dt)
    amp = np.asarray(alpha, dtype=float) * np.sqrt(-np.expm1(2.0 * lam * dt) / (-2.0 * lam))
    return decay, amp


def to_table_order(xi, N):
    """Scatter values listed in linear-index order onto the ``(N, N)`` table."""
    return np.asarray(xi)[..., spectral.linear_index(N) - 1]


def ou_step(state, dt, rng):
    """Advance ``Z`` by ``dt`` using the normals keyed by ``rng``."""
    spec = state.spec
    lam = spectral.eigenvalues(spec.N, state.nu)
    decay, amp = ou_transition_coefficients(lam, spec.alpha_grid(), dt)
    xi = to_table_order(keyed_normals(rng, spec.K), spec.N)
    return replace(state, z=decay * state.z + amp * xi, t=state.t + dt, step=state.step + 1)


def stationary_variance(spec, nu, k):
    """``alpha_k^2 / (2 |lambda_k|)``; ``k`` is a linear index or an ``(m, n)`` pair."""
    if isinstance(k, tuple):
        k = spectral.mode_to_index(*k, spec.N)
    if not 1 <= k <= spec.K:
        raise IndexError(f"mode index {k} outside truncation 1..{spec.K}")
    return float(spec.alphas()[k - 1] ** 2 / (2.0 * abs_eigenvalues(spec.N, nu)[k - 1]))


def sup_mean_square_Z(paths):
    """
    ``max_t mean_paths ||Z(t)||^2`` for paths shaped ``(n_paths, n_times, ...)``.

    Trailing axes are summed (coefficient sum of squares).
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim < 2 or paths.shape[0] < MIN_PATHS:
        n = paths.shape[0] if paths.ndim else 0
        raise InsufficientSamplesError(f"need at least {MIN_PATHS} paths, got {n}")
    sq = paths.reshape(paths.shape[0], paths.shape[1], -1) ** 2
    return float(np.max(np.mean(np.sum(sq, axis=-1), axis=0)))
