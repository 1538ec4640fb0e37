"""Surface-oracle tests with independent numeric oracles.

The local-feature-size formulas (distance to a closed-form medial set) are
checked two independent ways:
  * brute force: densely sample the claimed medial set and compare nearest
    distances (validates the point-to-set computation), and
  * maximal-tangent-ball search: grow an empty tangent ball along the normal
    until it hits the surface elsewhere (validates the medial set itself at
    symmetry points, without using any medial formula).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from vorocrust.errors import AmbiguousProjection, FormatError
from vorocrust.surfaces import (
    Ellipsoid,
    Sphere,
    SurfSide,
    Torus,
    parse_surface,
)


def max_tangent_ball_radius(surface, p, inward, probes, hi):
    """Binary-search the largest r with ball(p - r*inward... empty of surface."""
    tree = cKDTree(probes)
    lo = 0.0
    for _ in range(40):
        r = 0.5 * (lo + hi)
        center = p + r * inward
        d, _ = tree.query(center)
        if d >= r - 1e-9:
            lo = r
        else:
            hi = r
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# sphere


def test_sphere_signed_distance_exact():
    s = Sphere(2.0)
    X = np.array([[0, 0, 0], [2, 0, 0], [0, 3, 0], [0, 0, -5]], dtype=float)
    np.testing.assert_allclose(s.signed_distance(X), [-2.0, 0.0, 1.0, 3.0], atol=1e-15)


def test_sphere_side_classification():
    s = Sphere(1.0)
    assert s.signed_side(np.array([0.5, 0, 0])) == SurfSide.INSIDE
    assert s.signed_side(np.array([2.0, 0, 0])) == SurfSide.OUTSIDE
    assert s.signed_side(np.array([1.0, 0, 0])) == SurfSide.ON
    assert s.signed_side(np.array([0, 1.0 + 1e-13, 0])) == SurfSide.ON


def test_sphere_lfs_constant():
    s = Sphere(3.5)
    P = s.probe_points(500)
    np.testing.assert_allclose(s.lfs_at(P), 3.5, rtol=1e-12)


def test_sphere_projection():
    s = Sphere(2.0)
    sp = s.project(np.array([3.0, 4.0, 0.0]))
    np.testing.assert_allclose(sp.position, [1.2, 1.6, 0.0], atol=1e-14)
    np.testing.assert_allclose(sp.normal, [0.6, 0.8, 0.0], atol=1e-14)
    assert sp.lfs == pytest.approx(2.0)
    with pytest.raises(AmbiguousProjection):
        s.project(np.zeros(3))


def test_sphere_probes_on_surface_and_spread():
    s = Sphere(1.0)
    P = s.probe_points(2000)
    np.testing.assert_allclose(np.linalg.norm(P, axis=1), 1.0, atol=1e-12)
    # quasi-uniform: nearest-neighbor spacing concentrated around sqrt(4pi/n)
    d, _ = cKDTree(P).query(P, k=2)
    nn = d[:, 1]
    target = math.sqrt(4 * math.pi / 2000)
    assert nn.min() > 0.4 * target and nn.max() < 2.5 * target


# ---------------------------------------------------------------------------
# torus


def test_torus_point_on_surface_frozen():
    t = Torus(1.0, 0.3)
    assert t.signed_side(np.array([1.0, 0.0, 0.3])) == SurfSide.ON


def test_torus_signed_distance_construction():
    t = Torus(1.0, 0.3)
    # point at tube angle psi, poloidal offset s from the tube surface
    for theta, psi, s in [(0.3, 1.1, 0.2), (2.0, -0.5, -0.1), (4.0, 3.0, 0.55)]:
        core = np.array([math.cos(theta), math.sin(theta), 0.0])
        nu = np.array(
            [math.cos(psi) * math.cos(theta), math.cos(psi) * math.sin(theta), math.sin(psi)]
        )
        x = core + (0.3 + s) * nu
        assert t.signed_distance(x[None, :])[0] == pytest.approx(s, abs=1e-12)


def test_torus_lfs_constant_and_bruteforce_medial():
    t = Torus(1.0, 0.3)
    P = t.probe_points(400)
    np.testing.assert_allclose(t.lfs_at(P), 0.3, atol=1e-12)
    # independent oracle: densely sample core circle + symmetry axis
    ang = np.linspace(0, 2 * math.pi, 200_000, endpoint=False)
    core = np.column_stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)])
    zz = np.linspace(-3, 3, 200_000)
    axis = np.column_stack([np.zeros_like(zz), np.zeros_like(zz), zz])
    tree = cKDTree(np.vstack([core, axis]))
    rng = np.random.default_rng(7)
    X = rng.uniform(-1.5, 1.5, size=(200, 3))
    d_oracle, _ = tree.query(X)
    np.testing.assert_allclose(t.medial_distance(X), d_oracle, atol=1e-4)


def test_torus_maximal_tangent_ball():
    t = Torus(1.0, 0.3)
    probes = t.probe_points(200_000)
    # outer equator, inner equator, top of tube
    for p in [np.array([1.3, 0, 0]), np.array([0.7, 0, 0]), np.array([1.0, 0, 0.3])]:
        n = t.normal_at(p[None, :])[0]
        r_in = max_tangent_ball_radius(t, p, -n, probes, hi=1.5)
        assert r_in == pytest.approx(0.3, abs=2e-3)


def test_torus_projection_and_normal():
    t = Torus(1.0, 0.3)
    rng = np.random.default_rng(3)
    X = rng.uniform(-1.6, 1.6, size=(300, 3))
    X = X[t.medial_distance(X) > 0.05]
    P = t.project_batch(X)
    assert np.max(np.abs(t.signed_distance(P))) < 1e-12
    # optimality: displacement is parallel to the surface normal at the foot
    N = t.normal_at(P)
    cross = np.cross(X - P, N)
    assert np.max(np.linalg.norm(cross, axis=1)) < 1e-9
    with pytest.raises(AmbiguousProjection):
        t.project(np.array([0.0, 0.0, 0.7]))  # on the symmetry axis
    with pytest.raises(AmbiguousProjection):
        t.project(np.array([1.0, 0.0, 0.0]))  # on the core circle


def test_torus_probes_on_surface():
    t = Torus(1.0, 0.3)
    P = t.probe_points(5000)
    assert np.max(np.abs(t.signed_distance(P))) < 1e-9
    # poloidal angle quasi-uniform in area: x-heavy outer side sampled more
    rho = np.hypot(P[:, 0], P[:, 1])
    assert (rho > 1.0).mean() > 0.5


def test_torus_validation():
    with pytest.raises(ValueError):
        Torus(1.0, 0.6)
    with pytest.raises(ValueError):
        Torus(1.0, 0.0)


# ---------------------------------------------------------------------------
# ellipsoid


def test_prolate_pole_lfs_exact():
    e = Ellipsoid(2.0, 1.0, 1.0)
    # side pole: distance to the medial segment [-1.5, 1.5] on the x axis
    assert e.lfs_at(np.array([[0.0, 0.0, 1.0]]))[0] == pytest.approx(1.0, abs=1e-12)
    assert e.lfs_at(np.array([[0.0, 1.0, 0.0]]))[0] == pytest.approx(1.0, abs=1e-12)
    # tip: a - (a^2-c^2)/a = c^2/a
    assert e.lfs_at(np.array([[2.0, 0.0, 0.0]]))[0] == pytest.approx(0.5, abs=1e-12)


def test_prolate_maximal_tangent_ball():
    e = Ellipsoid(2.0, 1.0, 1.0)
    probes = e.probe_points(400_000)
    tip = np.array([2.0, 0.0, 0.0])
    r_tip = max_tangent_ball_radius(e, tip, -e.normal_at(tip[None, :])[0], probes, hi=1.8)
    assert r_tip == pytest.approx(0.5, abs=3e-3)
    side = np.array([0.0, 0.0, 1.0])
    r_side = max_tangent_ball_radius(e, side, -e.normal_at(side[None, :])[0], probes, hi=1.8)
    assert r_side == pytest.approx(1.0, abs=3e-3)


def test_triaxial_medial_disk_bruteforce():
    e = Ellipsoid(2.0, 1.3, 0.9)
    mx, my = e.medial_x, e.medial_y
    assert mx == pytest.approx((4.0 - 0.81) / 2.0)
    assert my == pytest.approx((1.69 - 0.81) / 1.3)
    # dense sampling of the claimed medial disk
    r = np.sqrt(np.linspace(0.0, 1.0, 900))
    th = np.linspace(0, 2 * math.pi, 2200, endpoint=False)
    R, T = np.meshgrid(r, th)
    disk = np.column_stack(
        [(R * np.cos(T)).ravel() * mx, (R * np.sin(T)).ravel() * my, np.zeros(R.size)]
    )
    tree = cKDTree(disk)
    P = e.probe_points(400)
    d_oracle, _ = tree.query(P)
    np.testing.assert_allclose(e.lfs_at(P), d_oracle, atol=4e-3)
    # interior/exterior space points too, not just surface points
    rng = np.random.default_rng(11)
    X = rng.uniform(-2.2, 2.2, size=(300, 3))
    d_oracle, _ = tree.query(X)
    np.testing.assert_allclose(e.medial_distance(X), d_oracle, atol=4e-3)


def test_triaxial_tangent_ball_consistency():
    e = Ellipsoid(2.0, 1.3, 0.9)
    probes = e.probe_points(400_000)
    tip = np.array([2.0, 0.0, 0.0])
    r_tip = max_tangent_ball_radius(e, tip, -e.normal_at(tip[None, :])[0], probes, hi=1.8)
    assert r_tip == pytest.approx(0.81 / 2.0, abs=3e-3)  # c^2 / a
    pole = np.array([0.0, 0.0, 0.9])
    r_pole = max_tangent_ball_radius(e, pole, -e.normal_at(pole[None, :])[0], probes, hi=1.8)
    assert r_pole == pytest.approx(0.9, abs=3e-3)


def test_ellipsoid_projection_residual_and_minimality():
    e = Ellipsoid(2.0, 1.3, 0.9)
    rng = np.random.default_rng(5)
    X = rng.uniform(-2.5, 2.5, size=(500, 3))
    X = X[e.medial_distance(X) > 0.05]
    P = e.project_batch(X)
    res = (P[:, 0] / 2.0) ** 2 + (P[:, 1] / 1.3) ** 2 + (P[:, 2] / 0.9) ** 2 - 1.0
    assert np.max(np.abs(res)) < 1e-12
    N = e.normal_at(P)
    cross = np.cross(X - P, N)
    assert np.max(np.linalg.norm(cross, axis=1)) < 1e-8
    # minimality against a dense surface net
    net = e.probe_points(300_000)
    tree = cKDTree(net)
    d_net, _ = tree.query(X)
    d_proj = np.linalg.norm(X - P, axis=1)
    assert np.all(d_proj <= d_net + 1e-9)


def test_ellipsoid_projection_ambiguous_on_medial_disk():
    e = Ellipsoid(2.0, 1.3, 0.9)
    with pytest.raises(AmbiguousProjection):
        e.project(np.array([0.5, 0.2, 0.0]))


def test_ellipsoid_sphere_degenerate():
    e = Ellipsoid(1.5, 1.5, 1.5)
    P = e.probe_points(100)
    np.testing.assert_allclose(e.lfs_at(P), 1.5, atol=1e-12)


def test_ellipsoid_validation():
    with pytest.raises(ValueError):
        Ellipsoid(1.0, 2.0, 0.5)
    with pytest.raises(ValueError):
        Ellipsoid(1.0, 0.5, 0.0)


# ---------------------------------------------------------------------------
# shared behavior


@pytest.mark.parametrize(
    "surf",
    [Sphere(1.0), Torus(1.0, 0.3), Ellipsoid(2.0, 1.3, 0.9)],
    ids=lambda s: s.kind,
)
def test_random_points_on_surface_and_deterministic(surf):
    pts = surf.random_points(np.random.default_rng(42), 500)
    assert pts.shape == (500, 3)
    assert np.max(np.abs(surf.signed_distance(pts))) < 1e-9
    again = surf.random_points(np.random.default_rng(42), 500)
    np.testing.assert_array_equal(pts, again)


@pytest.mark.parametrize(
    "surf",
    [Sphere(1.0), Torus(1.0, 0.3), Ellipsoid(2.0, 1.3, 0.9)],
    ids=lambda s: s.kind,
)
def test_probe_points_deterministic_and_in_bbox(surf):
    a = surf.probe_points(333)
    b = surf.probe_points(333)
    np.testing.assert_array_equal(a, b)
    lo, hi = surf.bbox()
    assert np.all(a >= lo - 1e-12) and np.all(a <= hi + 1e-12)


def test_volumes():
    assert Sphere(1.0).volume() == pytest.approx(4 * math.pi / 3)
    assert Torus(1.0, 0.3).volume() == pytest.approx(2 * math.pi**2 * 0.09)
    assert Ellipsoid(2.0, 1.3, 0.9).volume() == pytest.approx(4 * math.pi / 3 * 2.34)


def test_euler_characteristics():
    assert Sphere(1.0).expected_euler == 2
    assert Ellipsoid(2.0, 1.3, 0.9).expected_euler == 2
    assert Torus(1.0, 0.3).expected_euler == 0


def test_parse_surface():
    s = parse_surface("sphere:2.5")
    assert isinstance(s, Sphere) and s.radius == 2.5
    t = parse_surface("torus:1,0.3")
    assert isinstance(t, Torus) and (t.r_major, t.r_minor) == (1.0, 0.3)
    e = parse_surface("ellipsoid:2,1.3,0.9")
    assert isinstance(e, Ellipsoid) and (e.a, e.b, e.c) == (2.0, 1.3, 0.9)
    for bad in ["cube:1", "sphere", "sphere:", "sphere:1,2", "torus:1", "torus:1,0.6", "sphere:x"]:
        with pytest.raises(FormatError):
            parse_surface(bad)


@settings(max_examples=60, deadline=None)
@given(
    theta=st.floats(0, 2 * math.pi),
    psi=st.floats(0, 2 * math.pi),
    # r + s must stay below 1 (= R): beyond the symmetry axis the nearest
    # surface point switches to the opposite meridian and sd != s
    s=st.floats(-0.25, 0.6),
)
def test_torus_signed_distance_property(theta, psi, s):
    t = Torus(1.0, 0.3)
    core = np.array([math.cos(theta), math.sin(theta), 0.0])
    nu = np.array(
        [math.cos(psi) * math.cos(theta), math.cos(psi) * math.sin(theta), math.sin(psi)]
    )
    x = core + (0.3 + s) * nu
    assert t.signed_distance(x[None, :])[0] == pytest.approx(s, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    x=st.floats(-3, 3),
    y=st.floats(-3, 3),
    z=st.floats(-3, 3),
)
def test_projection_idempotent_property(x, y, z):
    e = Ellipsoid(2.0, 1.0, 1.0)
    p = np.array([x, y, z])
    if e.medial_distance(p[None, :])[0] < 0.1:
        return
    q = e.project_batch(p[None, :])[0]
    q2 = e.project_batch(q[None, :])[0]
    np.testing.assert_allclose(q, q2, atol=1e-9)
