"""Geometric primitives: balls, sphere-triple intersection, circumcenters, triangle quality.

Scalar entry points operate on single primitives and raise on degeneracy; the
``*_batch`` variants run vectorized over numpy arrays and report failures through
masks instead (the hot paths never raise).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DegenerateCenters, DegenerateTriangle, NoIntersection

__all__ = [
    "Tolerance",
    "TOL",
    "Ball",
    "BallSide",
    "vec3",
    "power_distance",
    "point_in_ball",
    "points_in_ball_batch",
    "tri_sphere_intersect",
    "tri_sphere_intersect_batch",
    "circumcenter_radius",
    "circumcenter_radius_batch",
    "equidistant_point",
    "TriangleQuality",
    "triangle_quality",
]


@dataclass(frozen=True)
class Tolerance:
    """Boundary-classification tolerance: band(s) = max(abs_eps, rel_eps * s)."""

    rel_eps: float = 1e-10
    abs_eps: float = 1e-12

    def band(self, scale: float) -> float:
        return max(self.abs_eps, self.rel_eps * abs(float(scale)))


TOL = Tolerance()


def vec3(x, y, z) -> np.ndarray:
    return np.array([float(x), float(y), float(z)])


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")


class BallSide(IntEnum):
    INSIDE = -1
    BOUNDARY = 0
    OUTSIDE = 1


def power_distance(p, w_p, q, w_q) -> float:
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    return float(d @ d) - float(w_p) - float(w_q)


def point_in_ball(x, ball: Ball, tol: Tolerance = TOL) -> BallSide:
    s = float(np.linalg.norm(np.asarray(x, dtype=float) - ball.center)) - ball.radius
    band = tol.band(ball.radius)
    if s < -band:
        return BallSide.INSIDE
    if s > band:
        return BallSide.OUTSIDE
    return BallSide.BOUNDARY


def points_in_ball_batch(X, center, radius, tol: Tolerance = TOL):
    """Classify many points against one ball; returns an int array of BallSide values."""
    s = np.linalg.norm(X - center, axis=-1) - radius
    band = tol.band(radius)
    out = np.zeros(s.shape, dtype=np.int8)
    out[s < -band] = int(BallSide.INSIDE)
    out[s > band] = int(BallSide.OUTSIDE)
    return out


def _tri_sphere_frames(c1, c2, c3, r1, r2, r3):
    """Shared trilateration algebra; inputs broadcast over leading axes."""
    u = c2 - c1
    d = np.linalg.norm(u, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ex = u / d[..., None]
        t3 = c3 - c1
        i = np.einsum("...k,...k->...", ex, t3)
        ey_raw = t3 - i[..., None] * ex
        j = np.linalg.norm(ey_raw, axis=-1)
        ey = ey_raw / j[..., None]
        x = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
        y = (r1 * r1 - r3 * r3 + i * i + j * j - 2.0 * i * x) / (2.0 * j)
        z2 = r1 * r1 - x * x - y * y
    ez = np.cross(ex, ey)
    return d, j, ex, ey, ez, x, y, z2


def tri_sphere_intersect(b1: Ball, b2: Ball, b3: Ball, tol: Tolerance = TOL):
    """Intersect three sphere boundaries.

    Returns the two intersection points ordered by signed offset along
    (c2-c1) x (c3-c1): positive-offset point first. Raises NoIntersection when
    the spheres miss or are tangent within tolerance, DegenerateCenters when the
    centers are coincident/collinear.
    """
    c1, c2, c3 = b1.center, b2.center, b3.center
    r1, r2, r3 = b1.radius, b2.radius, b3.radius
    scale = max(r1, r2, r3)
    band = tol.band(scale)
    d, j, ex, ey, ez, x, y, z2 = _tri_sphere_frames(c1, c2, c3, r1, r2, r3)
    if not np.isfinite(d) or d <= band or not np.isfinite(j) or j <= band:
        raise DegenerateCenters("sphere centers coincident or collinear")
    if z2 <= band * band:
        raise NoIntersection("spheres tangent or disjoint")
    z = np.sqrt(z2)
    base = c1 + x * ex + y * ey
    return base + z * ez, base - z * ez


def tri_sphere_intersect_batch(C1, C2, C3, R1, R2, R3, tol: Tolerance = TOL):
    """Vectorized trilateration. Returns (P_plus, P_minus, valid mask)."""
    scale = np.maximum(np.maximum(R1, R2), R3)
    band = np.maximum(tol.abs_eps, tol.rel_eps * scale)
    d, j, ex, ey, ez, x, y, z2 = _tri_sphere_frames(C1, C2, C3, R1, R2, R3)
    valid = (
        np.isfinite(d) & (d > band) & np.isfinite(j) & (j > band) & (z2 > band * band)
    )
    z = np.sqrt(np.where(valid, z2, 0.0))
    base = C1 + x[..., None] * ex + y[..., None] * ey
    off = z[..., None] * ez
    return base + off, base - off, valid


def circumcenter_radius(a, b, c, tol: Tolerance = TOL):
    """Circumcenter and circumradius of a 3D triangle.

    Raises DegenerateTriangle for collinear or coincident vertices.
    """
    a = np.asarray(a, dtype=float)
    u = np.asarray(b, dtype=float) - a
    v = np.asarray(c, dtype=float) - a
    w = np.cross(u, v)
    lu = np.linalg.norm(u)
    lv = np.linalg.norm(v)
    if np.linalg.norm(w) <= tol.rel_eps * lu * lv + tol.abs_eps:
        raise DegenerateTriangle("collinear or coincident vertices")
    uu, vv, uv = u @ u, v @ v, u @ v
    det = uu * vv - uv * uv
    s = 0.5 * (uu * vv - vv * uv) / det
    t = 0.5 * (uu * vv - uu * uv) / det
    center = a + s * u + t * v
    return center, float(np.linalg.norm(center - a))


def circumcenter_radius_batch(A, B, C):
    """Vectorized circumcenters. Returns (centers, radii, valid mask)."""
    U = B - A
    V = C - A
    uu = np.einsum("...k,...k->...", U, U)
    vv = np.einsum("...k,...k->...", V, V)
    uv = np.einsum("...k,...k->...", U, V)
    det = uu * vv - uv * uv
    valid = det > 1e-300
    with np.errstate(invalid="ignore", divide="ignore"):
        s = 0.5 * (uu * vv - vv * uv) / det
        t = 0.5 * (uu * vv - uu * uv) / det
    centers = A + s[..., None] * U + t[..., None] * V
    radii = np.linalg.norm(centers - A, axis=-1)
    return centers, radii, valid


def equidistant_point(points):
    """Point equidistant from 4+ points (circumcenter of their sphere).

    For exactly 4 points solves the 3x3 bisector system; for more, least squares.
    Returns None when the system is singular (coplanar points).
    """
    P = np.asarray(points, dtype=float)
    q0 = P[0]
    A = 2.0 * (P[1:] - q0)
    b = np.einsum("ij,ij->i", P[1:], P[1:]) - q0 @ q0
    try:
        if A.shape[0] == 3:
            return np.linalg.solve(A, b)
        x, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank < 3:
            return None
        return x
    except np.linalg.LinAlgError:
        return None


@dataclass(frozen=True)
class TriangleQuality:
    min_angle: float  # radians
    max_angle: float
    edge_ratio: float  # longest / shortest
    altitude_ratio: float  # smallest altitude / longest edge
    edges: tuple  # sorted ascending


def triangle_quality(a, b, c, tol: Tolerance = TOL) -> TriangleQuality:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    e = np.array(
        [
            np.linalg.norm(b - c),
            np.linalg.norm(c - a),
            np.linalg.norm(a - b),
        ]
    )
    e_sorted = np.sort(e)
    if e_sorted[0] <= tol.band(e_sorted[2]):
        raise DegenerateTriangle("zero-length edge")
    area2 = np.linalg.norm(np.cross(b - a, c - a))  # twice the area
    if area2 <= tol.rel_eps * e_sorted[2] ** 2 + tol.abs_eps:
        raise DegenerateTriangle("collinear vertices")
    # angle at each vertex, law of cosines; e[k] is the edge opposite vertex k
    angles = []
    for k in range(3):
        o, p, q = e[k], e[(k + 1) % 3], e[(k + 2) % 3]
        cosang = np.clip((p * p + q * q - o * o) / (2.0 * p * q), -1.0, 1.0)
        angles.append(float(np.arccos(cosang)))
    return TriangleQuality(
        min_angle=min(angles),
        max_angle=max(angles),
        edge_ratio=float(e_sorted[2] / e_sorted[0]),
        altitude_ratio=float(area2 / e_sorted[2] / e_sorted[2]),
        edges=tuple(float(v) for v in e_sorted),
    )


def triangle_quality_batch(A, B, C):
    """Vectorized (min_angle, edge_ratio, altitude_ratio) for triangle arrays."""
    ea = np.linalg.norm(B - C, axis=-1)
    eb = np.linalg.norm(C - A, axis=-1)
    ec = np.linalg.norm(A - B, axis=-1)
    E = np.stack([ea, eb, ec], axis=-1)
    emin = E.min(axis=-1)
    emax = E.max(axis=-1)
    area2 = np.linalg.norm(np.cross(B - A, C - A), axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        angs = []
        for k in range(3):
            o = E[..., k]
            p = E[..., (k + 1) % 3]
            q = E[..., (k + 2) % 3]
            angs.append(np.arccos(np.clip((p * p + q * q - o * o) / (2 * p * q), -1, 1)))
        min_angle = np.minimum(np.minimum(angs[0], angs[1]), angs[2])
        edge_ratio = emax / emin
        altitude_ratio = area2 / (emax * emax)
    return min_angle, edge_ratio, altitude_ratio
