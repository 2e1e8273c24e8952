"""
Ensemble driver.

Members are advanced in fixed blocks of ``BLOCK_SIZE`` so that the floating
point work, and hence every output byte, does not depend on how many worker
threads are used. Each member draws its forcing from its own counter-based
stream keyed by ``(seed, member)``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .integrator import get_propagator, make_observable
from .ou import to_table_order
from .rng import NormalStream, next_normals

__all__ = ["BLOCK_SIZE", "EnsembleRun", "run_ensemble", "default_observables"]

log = logging.getLogger(__name__)

BLOCK_SIZE = 32
FIXED_OBSERVABLES = ("enstrophy", "energy", "coeff_1_1")


def default_observables(extra=()):
    names = list(FIXED_OBSERVABLES)
    names += [n for n in extra if n not in names]
    return names


@dataclass
class EnsembleRun:
    """Sampled observables, final states and captured checkpoints of one ensemble."""

    members: np.ndarray
    steps: np.ndarray
    dt: float
    values: dict
    omega: np.ndarray
    z: np.ndarray
    end_step: int
    checkpoints: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.steps * self.dt


def _run_block(prop, names, funcs, seed, members, omega, z, start, stop, sample_every,
               checkpoint_every):
    K = prop.noise.K
    N = prop.params.N
    dt = prop.params.dt
    streams = [NormalStream(seed, int(m), K, start) for m in members]
    rows = []
    checkpoints = {}

    def record(s):
        if s % sample_every == 0:
            rows.append((s, [f(omega) for f in funcs]))

    record(start)
    for s in range(start, stop):
        xi = to_table_order(next_normals(streams), N)
        omega, z = prop.advance(omega, z, xi, s * dt, members)
        record(s + 1)
        if checkpoint_every and (s + 1) % checkpoint_every == 0:
            checkpoints[s + 1] = (omega.copy(), z.copy())
    steps = np.array([r[0] for r in rows], dtype=np.int64)
    values = {
        name: np.stack([r[1][i] for r in rows], axis=-1) if rows else np.empty((len(members), 0))
        for i, name in enumerate(names)
    }
    return steps, values, omega, z, checkpoints


def run_ensemble(params, noise, omega0, members, seed, n_steps, *, sample_every=1,
                 observables=None, start_step=0, z0=None, checkpoint_every=0, threads=1,
                 nonlinear=True):
    """
    Advance every member from ``start_step`` to ``start_step + n_steps``.

    Parameters
    ----------
    omega0 : ndarray
        ``(N, N)`` (shared by all members) or ``(n_members, N, N)``.
    members : sequence of int
        Member ids; they key the forcing streams.
    sample_every : int
        Observables are recorded at absolute steps divisible by this.
    z0 : ndarray, optional
        Stochastic convolution at ``start_step`` (zero when starting fresh).
    checkpoint_every : int
        Capture ``(omega, z)`` at absolute steps divisible by this (0 = never).
    """
    members = np.asarray(members, dtype=np.int64)
    B = len(members)
    N = params.N
    if B == 0:
        raise DomainError("ensemble needs at least one member")
    if sample_every < 1:
        raise DomainError(f"sample_every must be >= 1, got {sample_every}")
    omega = np.broadcast_to(np.asarray(omega0, dtype=float), (B, N, N)).copy()
    z = np.zeros((B, N, N)) if z0 is None else np.broadcast_to(z0, (B, N, N)).copy()
    names = default_observables(observables or ())
    funcs = [make_observable(n, N) for n in names]
    prop = get_propagator(params, noise, nonlinear)
    stop = start_step + n_steps

    blocks = [slice(i, min(i + BLOCK_SIZE, B)) for i in range(0, B, BLOCK_SIZE)]

    def work(sl):
        return _run_block(prop, names, funcs, seed, members[sl], omega[sl], z[sl],
                          start_step, stop, sample_every, checkpoint_every)

    log.debug("ensemble of %d members in %d blocks, %d steps", B, len(blocks), n_steps)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(sl) for sl in blocks]

    steps = results[0][0]
    values = {n: np.concatenate([r[1][n] for r in results]) for n in names}
    checkpoints = {}
    for s in results[0][4]:
        checkpoints[s] = (np.concatenate([r[4][s][0] for r in results]),
                          np.concatenate([r[4][s][1] for r in results]))
    return EnsembleRun(
        members=members,
        steps=steps,
        dt=params.dt,
        values=values,
        omega=np.concatenate([r[2] for r in results]),
        z=np.concatenate([r[3] for r in results]),
        end_step=stop,
        checkpoints=checkpoints,
    )
