"""Analytic closed-surface oracles: inside/outside tests, projection, local feature size.

Local feature size is the distance to the medial axis, which is closed-form for
this family: a point for the sphere, core circle + symmetry axis for the torus
(constant r_minor when R >= 2r), and the elliptical medial disk in the plane of
the two longest axes for the ellipsoid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import AmbiguousProjection, FormatError
from .geom import TOL, Tolerance

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
GOLDEN_FRAC = (math.sqrt(5.0) - 1.0) / 2.0

__all__ = [
    "SurfSide",
    "SurfacePoint",
    "Surface",
    "Sphere",
    "Torus",
    "Ellipsoid",
    "parse_surface",
]


class SurfSide(IntEnum):
    INSIDE = -1
    ON = 0
    OUTSIDE = 1


@dataclass(frozen=True)
class SurfacePoint:
    position: np.ndarray
    normal: np.ndarray
    lfs: float


class Surface:
    """Common interface; subclasses fill in the analytic pieces."""

    kind: str = ""
    expected_euler: int = 2

    # -- analytic queries ---------------------------------------------------

    def signed_distance(self, X):
        """Exact or first-order signed distance, vectorized; negative inside."""
        raise NotImplementedError

    def medial_distance(self, X):
        """Distance from arbitrary points to the medial axis, vectorized."""
        raise NotImplementedError

    def normal_at(self, P):
        """Outward unit normals at points assumed to lie on the surface."""
        raise NotImplementedError

    def project_batch(self, X):
        """Closest surface points for points off the medial axis, vectorized."""
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError

    def bbox(self):
        """(lo, hi) axis-aligned bounds of the surface."""
        raise NotImplementedError

    def probe_points(self, n: int):
        """Deterministic quasi-uniform surface points (golden-ratio lattice)."""
        raise NotImplementedError

    def random_points(self, rng, n: int):
        """Area-uniform random surface points."""
        raise NotImplementedError

    # -- shared helpers -----------------------------------------------------

    def lfs_at(self, P):
        return self.medial_distance(P)

    def min_lfs(self) -> float:
        raise NotImplementedError

    def max_lfs(self) -> float:
        raise NotImplementedError

    def signed_side_batch(self, X, tol: Tolerance = TOL):
        sd = self.signed_distance(np.asarray(X, dtype=float))
        band = tol.band(self.min_lfs())
        out = np.zeros(sd.shape, dtype=np.int8)
        out[sd < -band] = int(SurfSide.INSIDE)
        out[sd > band] = int(SurfSide.OUTSIDE)
        return out

    def signed_side(self, x, tol: Tolerance = TOL) -> SurfSide:
        return SurfSide(int(self.signed_side_batch(np.asarray(x, dtype=float)[None, :], tol)[0]))

    def project(self, x, tol: Tolerance = TOL) -> SurfacePoint:
        x = np.asarray(x, dtype=float)
        if self.medial_distance(x[None, :])[0] <= tol.band(self.max_lfs()):
            raise AmbiguousProjection("point is on the medial axis")
        p = self.project_batch(x[None, :])[0]
        return SurfacePoint(
            position=p,
            normal=self.normal_at(p[None, :])[0],
            lfs=float(self.lfs_at(p[None, :])[0]),
        )


def _fibonacci_sphere(n: int):
    k = np.arange(n)
    z = 1.0 - (2.0 * k + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = GOLDEN_ANGLE * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


class Sphere(Surface):
    kind = "sphere"
    expected_euler = 2

    def __init__(self, radius: float):
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        self.radius = float(radius)

    def __repr__(self):
        return f"sphere:{self.radius:g}"

    def signed_distance(self, X):
        return np.linalg.norm(X, axis=-1) - self.radius

    def medial_distance(self, X):
        return np.linalg.norm(X, axis=-1)

    def normal_at(self, P):
        return P / np.linalg.norm(P, axis=-1, keepdims=True)

    def project_batch(self, X):
        n = np.linalg.norm(X, axis=-1, keepdims=True)
        return X * (self.radius / n)

    def min_lfs(self):
        return self.radius

    def max_lfs(self):
        return self.radius

    def volume(self):
        return 4.0 / 3.0 * math.pi * self.radius**3

    def bbox(self):
        r = self.radius
        return np.array([-r, -r, -r]), np.array([r, r, r])

    def probe_points(self, n):
        return self.radius * _fibonacci_sphere(n)

    def random_points(self, rng, n):
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return self.radius * v


class Torus(Surface):
    """Torus around the z axis; requires R_major >= 2 r_minor so lfs == r_minor."""

    kind = "torus"
    expected_euler = 0

    def __init__(self, r_major: float, r_minor: float):
        if not (r_minor > 0 and r_major >= 2.0 * r_minor):
            raise ValueError("torus requires r_major >= 2*r_minor > 0")
        self.r_major = float(r_major)
        self.r_minor = float(r_minor)

    def __repr__(self):
        return f"torus:{self.r_major:g},{self.r_minor:g}"

    def _core_distance(self, X):
        rho = np.hypot(X[..., 0], X[..., 1])
        return np.hypot(rho - self.r_major, X[..., 2]), rho

    def signed_distance(self, X):
        d, _ = self._core_distance(X)
        return d - self.r_minor

    def medial_distance(self, X):
        # medial axis = core circle + symmetry axis
        d_core, rho = self._core_distance(X)
        return np.minimum(d_core, rho)

    def normal_at(self, P):
        rho = np.hypot(P[..., 0], P[..., 1])
        core = np.empty_like(P)
        core[..., 0] = self.r_major * P[..., 0] / rho
        core[..., 1] = self.r_major * P[..., 1] / rho
        core[..., 2] = 0.0
        v = P - core
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def project_batch(self, X):
        rho = np.hypot(X[..., 0], X[..., 1])
        core = np.empty_like(X)
        core[..., 0] = self.r_major * X[..., 0] / rho
        core[..., 1] = self.r_major * X[..., 1] / rho
        core[..., 2] = 0.0
        v = X - core
        return core + v * (self.r_minor / np.linalg.norm(v, axis=-1, keepdims=True))

    def min_lfs(self):
        return self.r_minor

    def max_lfs(self):
        return self.r_minor

    def volume(self):
        return 2.0 * math.pi**2 * self.r_major * self.r_minor**2

    def bbox(self):
        s = self.r_major + self.r_minor
        return np.array([-s, -s, -self.r_minor]), np.array([s, s, self.r_minor])

    def _psi_from_u(self, u):
        """Invert the tube-angle CDF (density ~ R + r cos psi) by Newton."""
        R, r = self.r_major, self.r_minor
        target = 2.0 * math.pi * R * u  # in (psi + (r/R) sin psi) * R form
        psi = 2.0 * math.pi * u
        for _ in range(30):
            g = R * psi + r * np.sin(psi) - target
            psi = psi - g / (R + r * np.cos(psi))
        return psi

    def _embed(self, theta, psi):
        R, r = self.r_major, self.r_minor
        w = R + r * np.cos(psi)
        return np.column_stack([w * np.cos(theta), w * np.sin(theta), r * np.sin(psi)])

    def probe_points(self, n):
        k = np.arange(n)
        theta = 2.0 * math.pi * np.mod(k * GOLDEN_FRAC, 1.0)
        psi = self._psi_from_u((k + 0.5) / n)
        return self._embed(theta, psi)

    def random_points(self, rng, n):
        R, r = self.r_major, self.r_minor
        out = np.empty((n, 3))
        got = 0
        while got < n:
            m = max(64, int(1.6 * (n - got)))
            theta = rng.uniform(0, 2 * math.pi, m)
            psi = rng.uniform(0, 2 * math.pi, m)
            keep = rng.uniform(0, 1, m) <= (R + r * np.cos(psi)) / (R + r)
            take = min(int(keep.sum()), n - got)
            pts = self._embed(theta[keep][:take], psi[keep][:take])
            out[got : got + take] = pts
            got += take
        return out


class Ellipsoid(Surface):
    """Axis-aligned ellipsoid, semi-axes a >= b >= c > 0.

    The medial axis is the elliptical disk in the z = 0 plane with semi-axes
    (a^2-c^2)/a along x and (b^2-c^2)/b along y (degenerating to a segment for
    spheroids and to the center point for spheres).
    """

    kind = "ellipsoid"
    expected_euler = 2

    def __init__(self, a: float, b: float, c: float):
        if not (a >= b >= c > 0):
            raise ValueError("ellipsoid requires a >= b >= c > 0")
        self.a, self.b, self.c = float(a), float(b), float(c)
        self.medial_x = (a * a - c * c) / a
        self.medial_y = (b * b - c * c) / b
        self._axes = np.array([self.a, self.b, self.c])
        probes = self.probe_points(4096)
        self._max_lfs = float(self.medial_distance(probes).max())
        self._min_lfs = float(self.medial_distance(probes).min()) * 0.9

    def __repr__(self):
        return f"ellipsoid:{self.a:g},{self.b:g},{self.c:g}"

    def _implicit(self, X):
        Y = X / self._axes
        return np.einsum("...k,...k->...", Y, Y) - 1.0

    def signed_distance(self, X):
        # first-order: q / |grad q|; exact enough for side classification bands
        q = self._implicit(X)
        g = 2.0 * X / (self._axes**2)
        gn = np.maximum(np.linalg.norm(g, axis=-1), 1e-300)
        return q / gn

    def _ellipse_exterior_distance(self, X2, ax, ay):
        """2D distance from points outside the ellipse (ax, ay) to it (bisection)."""
        x, y = np.abs(X2[..., 0]), np.abs(X2[..., 1])
        lo = np.zeros_like(x)
        hi = np.sqrt((ax * x) ** 2 + (ay * y) ** 2) + 1.0
        for _ in range(90):
            t = 0.5 * (lo + hi)
            g = (ax * x / (ax * ax + t)) ** 2 + (ay * y / (ay * ay + t)) ** 2 - 1.0
            pos = g > 0
            lo = np.where(pos, t, lo)
            hi = np.where(pos, hi, t)
        t = 0.5 * (lo + hi)
        px = ax * ax * x / (ax * ax + t)
        py = ay * ay * y / (ay * ay + t)
        return np.hypot(x - px, y - py)

    def medial_distance(self, X):
        X = np.asarray(X, dtype=float)
        mx, my = self.medial_x, self.medial_y
        Z = X[..., 2]
        if mx < 1e-14:  # sphere: medial axis is the center
            return np.linalg.norm(X, axis=-1)
        if my < 1e-14:  # prolate spheroid: segment on the x axis
            ex = np.maximum(np.abs(X[..., 0]) - mx, 0.0)
            return np.sqrt(ex * ex + X[..., 1] ** 2 + Z * Z)
        inside = (X[..., 0] / mx) ** 2 + (X[..., 1] / my) ** 2 <= 1.0
        out = np.abs(Z).astype(float)
        if np.any(~inside):
            d2 = self._ellipse_exterior_distance(X[~inside][..., :2], mx, my)
            out = np.array(out, copy=True)
            out[~inside] = np.hypot(d2, Z[~inside])
        return out

    def normal_at(self, P):
        g = 2.0 * P / (self._axes**2)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def project_batch(self, X):
        """Closest-point projection via the safeguarded root of
        sum_i (a_i^2 x_i^2)/(a_i^2+t)^2 = 1 on t in (-c^2, inf)."""
        X = np.asarray(X, dtype=float)
        A2 = self._axes**2
        S = (A2 * X * X).sum(axis=-1)
        lo = np.full(S.shape, -self.c**2 * (1.0 - 1e-12))
        hi = np.sqrt(S) + A2[0]
        for _ in range(80):
            t = 0.5 * (lo + hi)
            g = (A2 * X * X / (A2 + t[..., None]) ** 2).sum(axis=-1) - 1.0
            pos = g > 0
            lo = np.where(pos, t, lo)
            hi = np.where(pos, hi, t)
        t = 0.5 * (lo + hi)
        for _ in range(3):  # Newton polish
            den = (A2 + t[..., None]) ** 2
            g = (A2 * X * X / den).sum(axis=-1) - 1.0
            dg = -2.0 * (A2 * X * X / (den * (A2 + t[..., None]))).sum(axis=-1)
            step = np.where(np.abs(dg) > 1e-300, g / dg, 0.0)
            t = t - step
        return A2 * X / (A2 + t[..., None])

    def min_lfs(self):
        return self._min_lfs

    def max_lfs(self):
        return self._max_lfs

    def volume(self):
        return 4.0 / 3.0 * math.pi * self.a * self.b * self.c

    def bbox(self):
        return -self._axes.copy(), self._axes.copy()

    def probe_points(self, n):
        return _fibonacci_sphere(n) * self._axes

    def random_points(self, rng, n):
        a, b, c = self.a, self.b, self.c
        wmax = a * b
        out = np.empty((n, 3))
        got = 0
        while got < n:
            m = max(64, int(2.0 * (n - got)))
            u = rng.normal(size=(m, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            w = np.sqrt((b * c * u[:, 0]) ** 2 + (a * c * u[:, 1]) ** 2 + (a * b * u[:, 2]) ** 2)
            keep = rng.uniform(0, 1, m) <= w / wmax
            take = min(int(keep.sum()), n - got)
            out[got : got + take] = u[keep][:take] * self._axes
            got += take
        return out


def parse_surface(text: str) -> Surface:
    """Parse 'sphere:R', 'torus:R,r' or 'ellipsoid:a,b,c'."""
    try:
        kind, _, arg = text.partition(":")
        vals = [float(v) for v in arg.split(",")] if arg else []
        if kind == "sphere" and len(vals) == 1:
            return Sphere(vals[0])
        if kind == "torus" and len(vals) == 2:
            return Torus(vals[0], vals[1])
        if kind == "ellipsoid" and len(vals) == 3:
            return Ellipsoid(vals[0], vals[1], vals[2])
    except ValueError as exc:
        raise FormatError(f"bad surface spec {text!r}: {exc}") from exc
    raise FormatError(f"bad surface spec {text!r}")
