"""
Time stepping of the stochastically forced QG vorticity equation.

The state is advanced with the exponential Euler-Maruyama map

    w_k <- exp(L_k dt) w_k + dt phi1(L_k dt) N_k(w) + dW_k,

where ``L_k = lambda_k - r`` holds the viscous and Ekman damping exactly,
``N(w) = -beta psi_x - J(psi, w)`` is frozen at the start of the step and
``dW_k`` is the exact stochastic increment of the linear part. The
stochastic convolution ``Z`` of the viscous semigroup is advanced alongside
with the same normals, so ``Y = w - Z`` is available at every step.
"""

import functools
import re
from dataclasses import dataclass, replace

import numpy as np

from . import spectral
from .errors import DomainError, GridMismatchError, InstabilityError
from .noise import NoiseSpec
from .ou import OUState, ou_transition_coefficients, to_table_order
from .rng import RngKey, keyed_normals

__all__ = [
    "ModelParams",
    "FlowState",
    "phi1",
    "nonlinear_F",
    "Propagator",
    "get_propagator",
    "step",
    "decompose_Y",
    "observables",
    "make_observable",
]


@dataclass(frozen=True)
class ModelParams:
    nu: float = 1.0
    r: float = 0.1
    beta: float = 0.0
    N: int = 32
    dt: float = 1e-3
    blowup: float = 1e8

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError(f"nu must be > 0, got {self.nu}")
        if not self.r >= 0:
            raise DomainError(f"r must be >= 0, got {self.r}")
        if not self.beta >= 0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        if not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if not self.blowup > 0:
            raise DomainError(f"blowup threshold must be > 0, got {self.blowup}")

    @property
    def diagnostic_only(self):
        """Ekman friction switched off: outside the regime the theory covers."""
        return self.r == 0


@dataclass(frozen=True)
class FlowState:
    omega: np.ndarray
    z: np.ndarray
    step: int
    params: ModelParams
    noise: NoiseSpec
    seed: int = 0
    member: int = 0

    def __post_init__(self):
        N = self.params.N
        if self.noise.N != N:
            raise DomainError(f"noise truncation {self.noise.N} differs from model N={N}")
        object.__setattr__(self, "omega", spectral.as_field(self.omega, N))
        object.__setattr__(self, "z", spectral.as_field(self.z, N))
        if self.step < 0:
            raise DomainError(f"step must be >= 0, got {self.step}")

    @classmethod
    def initial(cls, omega0, params, noise, seed=0, member=0):
        return cls(np.array(omega0, dtype=float), np.zeros((params.N, params.N)), 0,
                   params, noise, seed, member)

    @property
    def t(self):
        return self.step * self.params.dt

    @property
    def ou(self):
        return OUState(self.z, self.t, self.noise, self.params.nu, self.step)

    def key(self):
        return RngKey(self.seed, self.member, self.step)


def phi1(z):
    """``(exp(z) - 1) / z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def nonlinear_F(omega, params):
    """``F(w) = -r w - beta psi_x - J(psi, w)`` with ``psi`` the Poisson inverse of ``w``."""
    omega = spectral.as_field(omega, params.N)
    psi = spectral.poisson_solve(omega)
    return -params.r * omega - spectral.beta_term(psi, params.beta) - spectral.jacobian(psi, omega)


class Propagator:
    """One-step maps for fixed ``(params, noise)``; applies to ensembles ``(..., N, N)``."""

    def __init__(self, params, noise, nonlinear=True):
        self.params = params
        self.noise = noise
        self.nonlinear = nonlinear
        lam = spectral.eigenvalues(params.N, params.nu)
        L = lam - params.r
        alpha = noise.alpha_grid()
        self.decay, self.amp = ou_transition_coefficients(L, alpha, params.dt)
        self.weight = params.dt * phi1(L * params.dt)
        self.z_decay, self.z_amp = ou_transition_coefficients(lam, alpha, params.dt)

    def drift(self, omega):
        """Part of ``F`` not absorbed into the linear operator."""
        psi = spectral.poisson_solve(omega)
        out = -spectral.jacobian(psi, omega)
        if self.params.beta:
            out -= spectral.beta_term(psi, self.params.beta)
        return out

    def advance(self, omega, z, xi, t=0.0, members=None):
        """Return ``(omega, z)`` one step later; ``xi`` holds the normals on the table."""
        new = self.decay * omega + self.amp * xi
        if self.nonlinear:
            new += self.weight * self.drift(omega)
        self._guard(omega, new, t, members)
        return new, self.z_decay * z + self.z_amp * xi

    def _guard(self, old, new, t, members):
        norms = np.sqrt(np.sum(new * new, axis=(-2, -1)))
        bad = ~(norms <= self.params.blowup)
        if not np.any(bad):
            return
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        o = np.reshape(old, (-1,) + old.shape[-2:])[idx]
        n = np.reshape(new, (-1,) + new.shape[-2:])[idx]
        growth = np.where(np.isfinite(n), np.abs(n) - np.abs(o), np.inf)
        m, k = np.unravel_index(int(np.argmax(growth)), growth.shape)
        member = None if members is None else int(np.atleast_1d(members)[idx])
        t_new = t + self.params.dt
        raise InstabilityError(
            f"coefficient norm exceeded {self.params.blowup:g} at t={t_new:g} "
            f"(member {member}); fastest growth in mode ({m + 1}, {k + 1})",
            t=t_new, mode=(m + 1, k + 1), member=member,
        )


@functools.lru_cache(maxsize=32)
def get_propagator(params, noise, nonlinear=True):
    return Propagator(params, noise, nonlinear)


def step(state, rng=None, nonlinear=True):
    """
    Advance a single member by one step.

    ``rng`` defaults to the state's own key ``(seed, member, step)``, which is
    what the ensemble driver uses, so single-member and ensemble stepping see
    the same forcing.
    """
    rng = state.key() if rng is None else rng
    prop = get_propagator(state.params, state.noise, nonlinear)
    xi = to_table_order(keyed_normals(rng, state.noise.K), state.params.N)
    omega, z = prop.advance(state.omega, state.z, xi, state.t, state.member)
    return replace(state, omega=omega, z=z, step=state.step + 1)


def _stack(path, attr):
    times = None
    if len(path) and hasattr(path[0], attr):
        times = np.array([s.t for s in path])
        arr = np.stack([getattr(s, attr) for s in path])
    else:
        arr = np.asarray(path, dtype=float)
    return arr, times


def decompose_Y(omega_path, z_path):
    """
    ``Y(t) = omega(t) - Z(t)`` along aligned paths.

    Accepts sequences of :class:`FlowState` / :class:`OUState` (time grids are
    compared) or plain arrays of coefficient tables.
    """
    w, tw = _stack(omega_path, "omega")
    z, tz = _stack(z_path, "z")
    if w.shape != z.shape:
        raise GridMismatchError(f"paths have shapes {w.shape} and {z.shape}")
    if tw is not None and tz is not None and not np.array_equal(tw, tz):
        raise GridMismatchError("omega and Z paths are sampled on different time grids")
    return w - z


def observables(omega, modes=((1, 1),)):
    """Enstrophy ``||w||^2``, energy ``<-psi, w>`` and selected coefficients."""
    omega = spectral.as_field(omega)
    ens = np.sum(omega**2, axis=(-2, -1))
    energy = np.sum(omega**2 / (np.pi**2 * spectral.wavenumber_sq(omega.shape[-1])), axis=(-2, -1))
    coeffs = np.stack([omega[..., m - 1, n - 1] for m, n in modes], axis=-1)
    return {"enstrophy": ens, "energy": energy, "slice": coeffs}


_COEFF = re.compile(r"^coeff_(\d+)_(\d+)$")
_INDICATOR = re.compile(r"^(enstrophy|energy)_gt_(.+)$")


def _enstrophy(w):
    return np.sum(w * w, axis=(-2, -1))


def _energy(w):
    return np.sum(w * w / (np.pi**2 * spectral.wavenumber_sq(w.shape[-1])), axis=(-2, -1))


def make_observable(name, N=None):
    """
    Map an observable name to a function of a coefficient batch.

    Recognised names: ``enstrophy``, ``energy``, ``coeff_M_N`` and the
    indicators ``enstrophy_gt_Q`` / ``energy_gt_Q``.
    """
    if name == "enstrophy":
        return _enstrophy
    if name == "energy":
        return _energy
    m = _COEFF.match(name)
    if m:
        i, j = int(m.group(1)), int(m.group(2))
        if i < 1 or j < 1 or (N is not None and (i > N or j > N)):
            raise DomainError(f"observable {name!r} refers to a mode outside the truncation")
        return lambda w: w[..., i - 1, j - 1]
    m = _INDICATOR.match(name)
    if m:
        base = _enstrophy if m.group(1) == "enstrophy" else _energy
        try:
            q = float(m.group(2))
        except ValueError:
            raise DomainError(f"bad threshold in observable {name!r}") from None
        return lambda w: (base(w) > q).astype(float)
    raise DomainError(f"unknown observable {name!r}")
