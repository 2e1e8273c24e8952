import numpy as np
import pytest
from scipy import integrate

from qg_ergo.domain import (UNIT_SQUARE, PolygonDomain, disk_ratio, eigenfunction_bound_check,
                            kappa_estimate, kappa_search, polygon_disk_area)
from qg_ergo.errors import DomainError


def raster_area(domain, center, rho, n=2000):
    """Subgrid counting of |D ∩ B| on an n x n raster of the disc's bounding box."""
    h = 2 * rho / n
    u = -rho + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(center[0] + u, center[1] + u, indexing="ij")
    inside_disc = (X - center[0]) ** 2 + (Y - center[1]) ** 2 < rho**2
    pts = np.column_stack([X[inside_disc], Y[inside_disc]])
    return np.count_nonzero(domain.contains(pts)) * h * h


def square_area_quad(cx, cy, rho):
    """|unit square ∩ B| by integrating the chord length over x."""
    def chord(x):
        d = rho * rho - (x - cx) ** 2
        if d <= 0:
            return 0.0
        h = np.sqrt(d)
        return max(0.0, min(1.0, cy + h) - max(0.0, cy - h))

    return integrate.quad(chord, 0, 1, limit=200, epsabs=1e-12, points=[cx - rho, cx + rho])[0]


class TestPolygon:
    def test_square_properties(self):
        assert UNIT_SQUARE.area == pytest.approx(1.0)
        assert UNIT_SQUARE.diameter == pytest.approx(np.sqrt(2))

    def test_clockwise_input_is_reoriented(self):
        cw = PolygonDomain([[0, 0], [0, 1], [1, 1], [1, 0]])
        assert cw.area == pytest.approx(1.0)

    def test_closing_vertex_dropped(self):
        d = PolygonDomain([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]])
        assert len(d.vertices) == 4

    @pytest.mark.parametrize("verts", [
        [[0, 0], [1, 1], [1, 0], [0, 1]],           # bow tie
        [[0, 0], [1, 0], [2, 0]],                    # zero area
        [[0, 0], [1, 0]],                            # too few vertices
        [[0, 0], [1, 0], [np.nan, 1]],
    ])
    def test_invalid(self, verts):
        with pytest.raises(DomainError):
            PolygonDomain(verts)

    def test_contains(self):
        inside = UNIT_SQUARE.contains([[0.5, 0.5], [1.5, 0.5], [0.1, 0.9]])
        assert inside.tolist() == [True, False, True]


class TestDiskArea:
    def test_interior_disc(self):
        assert polygon_disk_area(UNIT_SQUARE, [[0.5, 0.5]], [0.1])[0, 0] == pytest.approx(
            np.pi * 0.01, rel=1e-12)

    def test_corner_quarter_disc(self):
        assert polygon_disk_area(UNIT_SQUARE, [[0, 0]], [0.3])[0, 0] == pytest.approx(
            np.pi * 0.09 / 4, rel=1e-12)

    def test_huge_disc_covers_polygon(self):
        assert polygon_disk_area(UNIT_SQUARE, [[0.2, 0.7]], [5.0])[0, 0] == pytest.approx(1.0)

    @pytest.mark.parametrize("center,rho", [((0.2, 0.3), 0.4), ((0.9, 0.5), 0.7),
                                            ((0.05, 0.95), 1.2), ((0.5, 0.5), 0.6)])
    def test_quadrature_oracle_square(self, center, rho):
        exact = polygon_disk_area(UNIT_SQUARE, [center], [rho])[0, 0]
        assert exact == pytest.approx(square_area_quad(*center, rho), abs=1e-8)

    def test_raster_oracle_triangle(self):
        # counting error is bounded by (boundary length inside the disc) * cell size
        tri = PolygonDomain([[0, 0], [1, 0], [0.3, 0.8]])
        for center, rho in [((0.3, 0.2), 0.25), ((0.1, 0.05), 0.5)]:
            exact = polygon_disk_area(tri, [center], [rho])[0, 0]
            h = 2 * rho / 2000
            assert exact == pytest.approx(raster_area(tri, center, rho), abs=4 * rho * h)

    def test_disc_domain_ratio_is_pi(self):
        disc = PolygonDomain.regular(512, radius=1.0)
        for x, y in [(0.0, 0.0), (0.3, -0.2), (-0.5, 0.4)]:
            assert disk_ratio(disc, x, y, 0.1) == pytest.approx(np.pi, rel=1e-12)

    def test_ratio_needs_positive_radius(self):
        with pytest.raises(DomainError):
            disk_ratio(UNIT_SQUARE, 0.5, 0.5, 0.0)


class TestKappa:
    def test_square_positive_and_above_infimum(self):
        k = kappa_estimate(UNIT_SQUARE, 128)
        # the infimum 1/2 is approached at the corner as rho -> sqrt(2)
        assert 0.5 < k < 0.52

    def test_grid_convergence(self):
        k128 = kappa_estimate(UNIT_SQUARE, 128)
        k256 = kappa_estimate(UNIT_SQUARE, 256)
        assert k256 <= k128
        assert abs(k128 - k256) / k256 < 0.05

    def test_search_metadata(self):
        res = kappa_search(UNIT_SQUARE, 64)
        assert res.resolution == 64 and res.n_centers > 0
        assert UNIT_SQUARE.contains([res.center])[0]
        assert 0 < res.radius < UNIT_SQUARE.diameter

    def test_thin_triangle(self):
        tri = PolygonDomain([[0, 0], [1, 0], [0, 0.2]])
        k = kappa_estimate(tri, 128)
        assert 0 < k < np.pi

    def test_resolution_floor(self):
        with pytest.raises(DomainError):
            kappa_estimate(UNIT_SQUARE, 32)


class TestEigenfunctionBound:
    def test_first_mode(self):
        rep = eigenfunction_bound_check(1, 1.0)
        assert rep.constant == pytest.approx(np.sqrt(2), rel=1e-14)
        assert rep.sup_abs == 2.0 and rep.passed

    def test_exhaustive_grid_oracle(self):
        # max |d e_k| / sqrt|lambda_k| over k <= (8, 8), evaluated on a 256^2 grid
        x = np.linspace(0, 1, 256)
        worst = 0.0
        for m in range(1, 9):
            for n in range(1, 9):
                dx = 2 * m * np.pi * np.outer(np.cos(m * np.pi * x), np.sin(n * np.pi * x))
                dy = 2 * n * np.pi * np.outer(np.sin(m * np.pi * x), np.cos(n * np.pi * x))
                lam = np.pi**2 * (m * m + n * n)
                worst = max(worst, max(np.abs(dx).max(), np.abs(dy).max()) / np.sqrt(lam))
        rep = eigenfunction_bound_check(8, 1.0)
        assert worst <= 2.0
        # the grid misses the exact maxima by O(grid spacing^2)
        assert worst <= rep.constant <= worst * (1 + 1e-4)
        assert rep.passed

    def test_viscosity_scaling(self):
        a = eigenfunction_bound_check(6, 1.0)
        b = eigenfunction_bound_check(6, 4.0)
        assert b.constant == pytest.approx(0.5 * a.constant, rel=1e-14)
        assert b.bound == pytest.approx(0.5 * a.bound)

    def test_invalid(self):
        with pytest.raises(DomainError):
            eigenfunction_bound_check(0, 1.0)
