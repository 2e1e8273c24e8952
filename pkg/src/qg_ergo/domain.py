"""
Geometric hypotheses on the fluid domain and the eigenbasis.

``kappa(D) = inf_{0 < rho < diam D} inf_{(x, y) in D} |D ∩ B((x, y), rho)| / rho^2``
is estimated by a grid search over centres and radii. Areas of
``polygon ∩ disc`` are exact: each edge contributes the signed area of the
triangle (centre, edge) clipped by the disc, which splits into straight
pieces (inside the circle) and circular sectors (outside).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "PolygonDomain",
    "polygon_disk_area",
    "disk_ratio",
    "KappaSearch",
    "kappa_search",
    "kappa_estimate",
    "EigenBoundReport",
    "eigenfunction_bound_check",
    "UNIT_SQUARE",
]


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    return ((o1 == 0 and on_segment(p1, p2, q1)) or (o2 == 0 and on_segment(p1, p2, q2))
            or (o3 == 0 and on_segment(q1, q2, p1)) or (o4 == 0 and on_segment(q1, q2, p2)))


@dataclass(frozen=True)
class PolygonDomain:
    """Simple polygon, stored counter-clockwise."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DomainError("polygon needs at least three (x, y) vertices")
        if np.allclose(v[0], v[-1]) and len(v) > 3:
            v = v[:-1]
        if not np.all(np.isfinite(v)):
            raise DomainError("polygon vertices must be finite")
        x, y = v[:, 0], v[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if abs(area) <= 1e-14 * max(1.0, np.ptp(x) * np.ptp(y)):
            raise DomainError("degenerate polygon: zero area")
        if area < 0:
            v = v[::-1]
        E = len(v)
        for i in range(E):
            for j in range(i + 1, E):
                if j == i + 1 or (i == 0 and j == E - 1):
                    continue
                if _segments_cross(v[i], v[(i + 1) % E], v[j], v[(j + 1) % E]):
                    raise DomainError(f"polygon edges {i} and {j} intersect")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def regular(cls, n, radius=1.0, center=(0.0, 0.0)):
        a = 2 * np.pi * np.arange(n) / n
        return cls(np.column_stack([center[0] + radius * np.cos(a),
                                    center[1] + radius * np.sin(a)]))

    @property
    def area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def diameter(self):
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    def contains(self, pts):
        """Even-odd test; points on the boundary may go either way."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        px, py = pts[:, 0], pts[:, 1]
        inside = np.zeros(len(pts), dtype=bool)
        v = self.vertices
        for (x1, y1), (x2, y2) in zip(v, np.roll(v, -1, axis=0)):
            crosses = (y1 > py) != (y2 > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (px < xint)
        return inside


UNIT_SQUARE = PolygonDomain(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def polygon_disk_area(domain, centers, radii):
    """
    Exact ``|D ∩ B(c, rho)|`` for every centre/radius pair.

    Returns an array of shape ``(len(centers), len(radii))``.
    """
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    r = np.atleast_1d(np.asarray(radii, dtype=float))
    r2 = (r * r)[None, :]
    total = np.zeros((len(c), len(r)))
    v = domain.vertices
    for p, q in zip(v, np.roll(v, -1, axis=0)):
        d = q - p
        a = float(d @ d)
        if a == 0:
            continue
        A = p - c
        b = (A @ d)[:, None]
        c0 = np.sum(A * A, axis=1)[:, None]
        cr = (A[:, 0] * d[1] - A[:, 1] * d[0])[:, None]
        disc = b * b - a * (c0 - r2)
        s = np.sqrt(np.maximum(disc, 0.0))
        t1 = np.where(disc > 0, np.clip((-b - s) / a, 0.0, 1.0), 0.0)
        t2 = np.where(disc > 0, np.clip((-b + s) / a, 0.0, 1.0), 0.0)
        # sector from A to A + t1 d, chord piece, sector from A + t2 d to B
        ang1 = np.arctan2(t1 * cr, c0 + t1 * b)
        ang2 = np.arctan2((1.0 - t2) * cr, c0 + b + t2 * (b + a))
        total += 0.5 * r2 * (ang1 + ang2) + 0.5 * (t2 - t1) * cr
    return total


def disk_ratio(domain, x, y, rho):
    """``|D ∩ B((x, y), rho)| / rho^2`` at a single point."""
    if not rho > 0:
        raise DomainError(f"radius must be positive, got {rho}")
    return float(polygon_disk_area(domain, [[x, y]], [rho])[0, 0] / rho**2)


@dataclass
class KappaSearch:
    """Grid-search minimum; an upper bound on the infimum it estimates."""

    value: float
    center: tuple
    radius: float
    resolution: int
    n_centers: int


def _candidate_centers(domain, resolution):
    g = max(8, resolution // 8)
    v = domain.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    ax = [lo[i] + (np.arange(g) + 0.5) * (hi[i] - lo[i]) / g for i in (0, 1)]
    X, Y = np.meshgrid(*ax, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    # points just inside each corner, along the interior bisector
    h = domain.diameter / resolution
    prev, nxt = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
    u1 = (prev - v) / np.linalg.norm(prev - v, axis=1)[:, None]
    u2 = (nxt - v) / np.linalg.norm(nxt - v, axis=1)[:, None]
    bis = u1 + u2
    norm = np.linalg.norm(bis, axis=1)
    bis = np.where(norm[:, None] > 1e-12, bis / np.maximum(norm, 1e-12)[:, None],
                   np.column_stack([-u1[:, 1], u1[:, 0]]))
    corners = np.concatenate([v + h * bis, v - h * bis])
    pts = np.concatenate([pts, corners])
    return pts[domain.contains(pts)]


def kappa_search(domain, resolution=256, chunk=2048):
    """
    Minimise ``|D ∩ B| / rho^2`` over a centre grid and ``resolution - 1`` radii.

    Centres are the cell centres of a ``max(8, resolution // 8)`` grid over the
    bounding box that fall inside ``D``, plus points one radius step inside
    each vertex; radii are ``j diam / resolution`` for ``j = 1..resolution-1``.
    """
    if int(resolution) != resolution or resolution < 64:
        raise DomainError(f"resolution must be an integer >= 64, got {resolution}")
    centers = _candidate_centers(domain, resolution)
    if len(centers) == 0:
        raise DomainError("no grid point falls inside the polygon")
    diam = domain.diameter
    radii = diam * np.arange(1, resolution) / resolution
    best = (np.inf, None, None)
    for i in range(0, len(centers), chunk):
        block = centers[i:i + chunk]
        ratio = polygon_disk_area(domain, block, radii) / radii**2
        j = int(np.argmin(ratio))
        ci, ri = np.unravel_index(j, ratio.shape)
        if ratio[ci, ri] < best[0]:
            best = (float(ratio[ci, ri]), tuple(block[ci]), float(radii[ri]))
    return KappaSearch(best[0], best[1], best[2], int(resolution), len(centers))


def kappa_estimate(domain, resolution=256):
    """Grid-search estimate of ``kappa(D)``; positive for any non-degenerate polygon."""
    return kappa_search(domain, resolution).value


@dataclass
class EigenBoundReport:
    N: int
    nu: float
    sup_abs: float
    constant: float
    bound: float
    worst_mode: tuple
    passed: bool


def eigenfunction_bound_check(N, nu):
    """
    Uniform bounds for the unit-square eigenfunctions ``2 sin(m pi x) sin(n pi y)``.

    ``|e_k| <= 2`` and ``max |grad e_k| / sqrt(|lambda_k|)`` equals
    ``2 max(m, n) / sqrt(nu (m^2 + n^2))``, which never exceeds ``2 / sqrt(nu)``.
    """
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    if not nu > 0:
        raise DomainError(f"viscosity must be positive, got {nu}")
    k = np.arange(1, N + 1, dtype=float)
    m, n = np.meshgrid(k, k, indexing="ij")
    ratio = 2.0 * np.pi * np.maximum(m, n) / np.sqrt(nu * np.pi**2 * (m * m + n * n))
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    C = float(ratio[i, j])
    bound = 2.0 / np.sqrt(nu)
    return EigenBoundReport(int(N), float(nu), 2.0, C, bound, (i + 1, j + 1), C <= bound)
