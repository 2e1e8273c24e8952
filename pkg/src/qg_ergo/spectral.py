"""
Sine-basis spectral operators on the unit square.

A field is stored as its coefficient table ``c`` of shape ``(..., N, N)``
against the orthonormal Dirichlet eigenbasis

    e_{m,n}(x, y) = 2 sin(m pi x) sin(n pi y),    1 <= m, n <= N,

with ``c[..., m-1, n-1]`` the coefficient of ``e_{m,n}``. Leading axes are
ensemble axes; every operator here broadcasts over them.

Linear ordering of modes: pairs are sorted by ``m^2 + n^2``, ties broken by
``m`` then ``n``, so ``k = 1`` is ``(1, 1)`` and the eigenvalues of
``A = nu * Laplacian`` are non-increasing in ``k``.

The quadratic Jacobian is evaluated pseudo-spectrally on the interior
type-I DST grid ``x_j = j / (M + 1)``, ``j = 1..M``. Products of two
truncated fields contain wavenumbers up to ``2N``; they alias onto
``2(M + 1) - q``, so ``M + 1 > N + n_out / 2`` makes the projection onto the
first ``n_out`` modes exact.
"""

import functools

import numpy as np

from .errors import DomainError, TruncationMismatchError

__all__ = [
    "mode_order",
    "linear_index",
    "index_to_mode",
    "mode_to_index",
    "wavenumber_sq",
    "eigenvalue_A",
    "eigenvalues",
    "eigenfunction_eval",
    "as_field",
    "zeros",
    "unit_mode",
    "laplacian",
    "poisson_solve",
    "to_grid",
    "from_grid",
    "collocation_size",
    "jacobian",
    "beta_term",
    "field_integral",
    "inner",
]


@functools.lru_cache(maxsize=None)
def _ordering(N):
    m, n = np.meshgrid(np.arange(1, N + 1), np.arange(1, N + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    order = np.lexsort((n, m, m * m + n * n))
    ms, ns = m[order], n[order]
    table = np.empty((N, N), dtype=np.int64)
    table[ms - 1, ns - 1] = np.arange(1, N * N + 1)
    for a in (ms, ns, table):
        a.setflags(write=False)
    return ms, ns, table


def mode_order(N):
    """Return ``(m, n)`` arrays listing the modes in linear-index order."""
    if N < 1:
        raise DomainError(f"truncation N must be >= 1, got {N}")
    ms, ns, _ = _ordering(int(N))
    return ms, ns


def linear_index(N):
    """``(N, N)`` table whose ``[m-1, n-1]`` entry is the linear index k."""
    if N < 1:
        raise DomainError(f"truncation N must be >= 1, got {N}")
    return _ordering(int(N))[2]


def index_to_mode(k, N):
    if not 1 <= k <= N * N:
        raise DomainError(f"linear index {k} outside 1..{N * N}")
    ms, ns, _ = _ordering(int(N))
    return int(ms[k - 1]), int(ns[k - 1])


def mode_to_index(m, n, N):
    if not (1 <= m <= N and 1 <= n <= N):
        raise DomainError(f"mode ({m}, {n}) outside truncation N={N}")
    return int(_ordering(int(N))[2][m - 1, n - 1])


@functools.lru_cache(maxsize=None)
def _wavenumber_sq(N):
    k = np.arange(1, N + 1, dtype=float)
    out = k[:, None] ** 2 + k[None, :] ** 2
    out.setflags(write=False)
    return out


def wavenumber_sq(N):
    """``m^2 + n^2`` on the coefficient table."""
    return _wavenumber_sq(int(N))


def eigenvalue_A(m, n, nu):
    """Eigenvalue ``-nu (m^2 + n^2) pi^2`` of ``nu * Laplacian`` for mode (m, n)."""
    if m < 1 or n < 1 or int(m) != m or int(n) != n:
        raise DomainError(f"wavenumbers must be positive integers, got ({m}, {n})")
    if not nu > 0:
        raise DomainError(f"viscosity must be positive, got {nu}")
    return -nu * (m * m + n * n) * np.pi**2


def eigenvalues(N, nu):
    """All eigenvalues on the ``(N, N)`` coefficient table."""
    if not nu > 0:
        raise DomainError(f"viscosity must be positive, got {nu}")
    return -nu * np.pi**2 * wavenumber_sq(N)


def eigenfunction_eval(m, n, x, y):
    """Evaluate the unit-norm eigenfunction ``2 sin(m pi x) sin(n pi y)``."""
    if m < 1 or n < 1:
        raise DomainError(f"wavenumbers must be positive, got ({m}, {n})")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any((y < 0) | (y > 1)):
        raise DomainError("coordinates must lie in the closed unit square")
    out = 2.0 * np.sin(m * np.pi * x) * np.sin(n * np.pi * y)
    return out if out.ndim else float(out)


def as_field(c, N=None):
    """Validate a coefficient table and return it as a float array."""
    c = np.asarray(c, dtype=float)
    if c.ndim < 2 or c.shape[-1] != c.shape[-2]:
        raise TruncationMismatchError(f"coefficient table must be (..., N, N), got {c.shape}")
    if N is not None and c.shape[-1] != N:
        raise TruncationMismatchError(f"expected truncation {N}, got {c.shape[-1]}")
    if not np.all(np.isfinite(c)):
        raise DomainError("coefficient table contains non-finite values")
    return c


def zeros(N):
    return np.zeros((N, N))


def unit_mode(N, m, n, amplitude=1.0):
    c = np.zeros((N, N))
    c[m - 1, n - 1] = amplitude
    return c


def laplacian(psi):
    psi = as_field(psi)
    return -np.pi**2 * wavenumber_sq(psi.shape[-1]) * psi


def poisson_solve(omega):
    """Stream function ``psi`` with ``Laplacian psi = omega``, zero on the walls."""
    omega = as_field(omega)
    return -omega / (np.pi**2 * wavenumber_sq(omega.shape[-1]))


def collocation_size(N, n_out=None):
    """Interior grid size needed to project ``N x N`` products onto ``n_out`` modes."""
    n_out = N if n_out is None else n_out
    return N + n_out // 2 + 1


class _Basis:
    """Sine/cosine tables on the interior DST-I grid of size ``M``."""

    def __init__(self, N, M, n_out):
        self.N, self.M, self.n_out = N, M, n_out
        x = np.arange(1, M + 1) / (M + 1)
        k = np.arange(1, N + 1)
        arg = np.pi * np.outer(x, k)
        self.S = np.sin(arg)
        self.ST = np.ascontiguousarray(self.S.T)
        dC = np.cos(arg) * (np.pi * k)
        self.dC = dC
        self.dCT = np.ascontiguousarray(dC.T)
        So = np.sin(np.pi * np.outer(x, np.arange(1, n_out + 1)))
        self.So = So
        self.SoT = np.ascontiguousarray(So.T)
        self.norm = 2.0 / (M + 1) ** 2

    def values_and_gradient(self, c):
        """Grid values of ``(f, f_x, f_y)``; the factor 2 of the basis is included."""
        sc = self.S @ (2.0 * c)
        dc = self.dC @ (2.0 * c)
        return sc @ self.ST, dc @ self.ST, sc @ self.dCT

    def gradient(self, c):
        sc = self.S @ (2.0 * c)
        dc = self.dC @ (2.0 * c)
        return dc @ self.ST, sc @ self.dCT

    def project(self, g):
        return self.norm * (self.SoT @ g @ self.So)


@functools.lru_cache(maxsize=64)
def _basis(N, M, n_out):
    return _Basis(N, M, n_out)


def to_grid(c, M=None):
    """Values of the field on the ``M x M`` interior grid (``M`` defaults to N)."""
    c = as_field(c)
    N = c.shape[-1]
    M = N if M is None else M
    b = _basis(N, M, N)
    return 2.0 * (b.S @ c @ b.ST)


def from_grid(g, N):
    """Project grid values onto the first ``N`` modes per direction (DST-I)."""
    g = np.asarray(g, dtype=float)
    M = g.shape[-1]
    if M < N:
        raise DomainError(f"grid of size {M} cannot resolve {N} modes")
    return _basis(N, M, N).project(g)


def jacobian(psi, omega, n_out=None):
    """
    Galerkin projection of ``J(psi, omega) = psi_x omega_y - psi_y omega_x``.

    Parameters
    ----------
    psi, omega : ndarray (..., N, N)
        Coefficient tables with the same truncation.
    n_out : int, optional
        Number of output modes per direction. Defaults to ``N``; ``2N`` returns
        the complete (untruncated) expansion of the product.
    """
    psi = as_field(psi)
    omega = as_field(omega)
    N = psi.shape[-1]
    if omega.shape[-1] != N:
        raise TruncationMismatchError(
            f"jacobian arguments have truncations {N} and {omega.shape[-1]}"
        )
    n_out = N if n_out is None else int(n_out)
    b = _basis(N, collocation_size(N, n_out), n_out)
    px, py = b.gradient(psi)
    wx, wy = b.gradient(omega)
    return b.project(px * wy - py * wx)


@functools.lru_cache(maxsize=None)
def _dx_projection(N):
    # <d/dx sin(q pi x), sin(m pi x)> weights in the orthonormal basis:
    # 4 m q / (m^2 - q^2) when m + q is odd, zero otherwise.
    k = np.arange(1, N + 1)
    m, q = k[:, None], k[None, :]
    odd = (m + q) % 2 == 1
    D = np.zeros((N, N))
    mm, qq = np.broadcast_arrays(m, q)
    mm, qq = mm[odd], qq[odd]
    D[odd] = 4.0 * mm * qq / (mm * mm - qq * qq)
    D.setflags(write=False)
    return D


def beta_term(psi, beta):
    """
    Galerkin projection of ``beta * psi_x`` back onto the sine basis.

    The x-derivative turns ``sin(q pi x)`` into ``cos(q pi x)``, whose sine
    expansion couples x-wavenumbers of opposite parity. The projection uses
    the closed-form integrals, so it is exact within the truncation and the
    operator is antisymmetric (energy neutral).
    """
    psi = as_field(psi)
    if beta < 0:
        raise DomainError(f"beta must be non-negative, got {beta}")
    if beta == 0:
        return np.zeros_like(psi)
    return beta * (_dx_projection(psi.shape[-1]) @ psi)


@functools.lru_cache(maxsize=None)
def _basis_integrals(N):
    k = np.arange(1, N + 1)
    w = (1 - (-1.0) ** k) / (k * np.pi)
    out = 2.0 * np.outer(w, w)
    out.setflags(write=False)
    return out


def field_integral(c):
    """Exact ``integral of f over the unit square`` from its coefficients."""
    c = as_field(c)
    return np.sum(c * _basis_integrals(c.shape[-1]), axis=(-2, -1))


def inner(f, g):
    """L2 inner product (coefficient dot product in the orthonormal basis)."""
    return np.sum(np.asarray(f) * np.asarray(g), axis=(-2, -1))
