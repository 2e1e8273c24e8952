import numpy as np
import pytest

from qg_ergo import spectral


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pair(rng, N):
    """Stream function and vorticity drawn independently, physically scaled."""
    psi = spectral.poisson_solve(rng.standard_normal((N, N)))
    omega = rng.standard_normal((N, N))
    return psi, omega


class Quadrature:
    """Gauss-Legendre tensor grid on the unit square with analytic field evaluation."""

    def __init__(self, n=256):
        x, w = np.polynomial.legendre.leggauss(n)
        self.x = 0.5 * (x + 1.0)
        self.w = 0.5 * w
        self.W = np.outer(self.w, self.w)

    def _sin(self, N):
        k = np.arange(1, N + 1)
        return np.sin(np.pi * np.outer(self.x, k)), np.pi * k * np.cos(np.pi * np.outer(self.x, k))

    def evaluate(self, c):
        """Values, x-derivative and y-derivative of a coefficient table on the grid."""
        N = c.shape[-1]
        S, dS = self._sin(N)
        f = 2.0 * S @ c @ S.T
        fx = 2.0 * dS @ c @ S.T
        fy = 2.0 * S @ c @ dS.T
        return f, fx, fy

    def integrate(self, g):
        return float(np.sum(self.W * g))

    def project(self, g, N):
        """Coefficients ``<g, e_mn>`` for ``m, n <= N``."""
        S, _ = self._sin(N)
        return 2.0 * S.T @ (self.W * g) @ S


@pytest.fixture(scope="session")
def quad():
    return Quadrature(256)
