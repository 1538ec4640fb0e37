import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vorocrust import geom
from vorocrust.errors import DegenerateCenters, DegenerateTriangle, NoIntersection
from vorocrust.geom import (
    Ball,
    BallSide,
    Tolerance,
    circumcenter_radius,
    point_in_ball,
    power_distance,
    tri_sphere_intersect,
    tri_sphere_intersect_batch,
    triangle_quality,
    vec3,
)


def residual_on_spheres(point, balls):
    """Oracle: worst |distance-to-center - radius| over the three spheres."""
    return max(abs(np.linalg.norm(point - b.center) - b.radius) for b in balls)


class TestPowerDistance:
    def test_distance_two_unit_weights(self):
        assert power_distance(vec3(0, 0, 0), 1.0, vec3(2, 0, 0), 1.0) == pytest.approx(2.0)

    def test_identical_points_zero_weights(self):
        p = vec3(0.3, -1.2, 4.0)
        assert power_distance(p, 0.0, p, 0.0) == 0.0

    @given(
        st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10),
        st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10),
        st.floats(0, 5), st.floats(0, 5),
    )
    def test_symmetry(self, px, py, pz, qx, qy, qz, wp, wq):
        p, q = vec3(px, py, pz), vec3(qx, qy, qz)
        assert power_distance(p, wp, q, wq) == pytest.approx(power_distance(q, wq, p, wp))


class TestPointInBall:
    def test_classification(self):
        b = Ball(vec3(0, 0, 0), 1.0)
        assert point_in_ball(vec3(0.5, 0, 0), b) == BallSide.INSIDE
        assert point_in_ball(vec3(2, 0, 0), b) == BallSide.OUTSIDE
        assert point_in_ball(vec3(1, 0, 0), b) == BallSide.BOUNDARY

    def test_band_scales_with_radius(self):
        b = Ball(vec3(0, 0, 0), 1000.0)
        # 1e-8 absolute offset is within the relative band at this scale
        assert point_in_ball(vec3(1000.0 + 1e-8, 0, 0), b) == BallSide.BOUNDARY
        tight = Tolerance(rel_eps=1e-13, abs_eps=1e-15)
        assert point_in_ball(vec3(1000.0 + 1e-8, 0, 0), b, tight) == BallSide.OUTSIDE


class TestTriSphereIntersect:
    def test_three_unit_spheres_symmetric(self):
        # mutual distance 1: intersection points at the equilateral-triangle
        # circumcenter, lifted by sqrt(1 - 1/3)
        b1 = Ball(vec3(0, 0, 0), 1.0)
        b2 = Ball(vec3(1, 0, 0), 1.0)
        b3 = Ball(vec3(0.5, np.sqrt(3) / 2, 0), 1.0)
        hi, lo = tri_sphere_intersect(b1, b2, b3)
        np.testing.assert_allclose(hi, [0.5, 0.2886751345948129, 0.816496580927726], atol=1e-12)
        np.testing.assert_allclose(lo, [0.5, 0.2886751345948129, -0.816496580927726], atol=1e-12)

    def test_order_follows_cross_product(self):
        b1 = Ball(vec3(0, 0, 0), 1.0)
        b2 = Ball(vec3(1, 0, 0), 1.0)
        b3 = Ball(vec3(0.5, np.sqrt(3) / 2, 0), 1.0)
        n = np.cross(b2.center - b1.center, b3.center - b1.center)
        hi, lo = tri_sphere_intersect(b1, b2, b3)
        assert (hi - lo) @ n > 0
        # swapping two balls flips the reference normal and hence the order
        hi2, lo2 = tri_sphere_intersect(b1, b3, b2)
        np.testing.assert_allclose(hi2, lo, atol=1e-12)
        np.testing.assert_allclose(lo2, hi, atol=1e-12)

    def test_residual_oracle_random_triples(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 200:
            centers = rng.normal(size=(3, 3))
            radii = rng.uniform(0.8, 2.0, size=3)
            balls = [Ball(c, r) for c, r in zip(centers, radii)]
            try:
                hi, lo = tri_sphere_intersect(*balls)
            except (NoIntersection, DegenerateCenters):
                continue
            assert residual_on_spheres(hi, balls) < 1e-10
            assert residual_on_spheres(lo, balls) < 1e-10
            checked += 1
        assert checked == 200

    def test_permutation_invariance(self):
        import itertools

        rng = np.random.default_rng(3)
        # centers at distance 1 from a shared point so the triple intersects
        q = rng.normal(size=3)
        dirs = rng.normal(size=(3, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        balls = [Ball(q + d, 1.0) for d in dirs]
        ref = sorted(tri_sphere_intersect(*balls), key=lambda p: tuple(p))
        for perm in itertools.permutations(balls):
            got = sorted(tri_sphere_intersect(*perm), key=lambda p: tuple(p))
            np.testing.assert_allclose(got, ref, atol=1e-9)

    def test_tangent_spheres_raise(self):
        b1 = Ball(vec3(0, 0, 0), 1.0)
        b2 = Ball(vec3(2, 0, 0), 1.0)  # tangent to b1 at (1,0,0)
        b3 = Ball(vec3(1, 0, 2), 2.0)  # passes through the tangency point
        with pytest.raises(NoIntersection):
            tri_sphere_intersect(b1, b2, b3)

    def test_disjoint_spheres_raise(self):
        with pytest.raises(NoIntersection):
            tri_sphere_intersect(
                Ball(vec3(0, 0, 0), 1.0), Ball(vec3(5, 0, 0), 1.0), Ball(vec3(0, 5, 0), 1.0)
            )

    def test_degenerate_centers(self):
        b = Ball(vec3(0, 0, 0), 1.0)
        with pytest.raises(DegenerateCenters):
            tri_sphere_intersect(b, Ball(vec3(0, 0, 0), 1.5), Ball(vec3(1, 0, 0), 1.0))
        with pytest.raises(DegenerateCenters):
            tri_sphere_intersect(
                b, Ball(vec3(1, 0, 0), 1.0), Ball(vec3(2, 0, 0), 1.0)
            )

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(11)
        C = rng.normal(size=(50, 3, 3))
        R = rng.uniform(0.8, 2.0, size=(50, 3))
        hi, lo, valid = tri_sphere_intersect_batch(
            C[:, 0], C[:, 1], C[:, 2], R[:, 0], R[:, 1], R[:, 2]
        )
        for k in range(50):
            balls = [Ball(C[k, i], R[k, i]) for i in range(3)]
            try:
                s_hi, s_lo = tri_sphere_intersect(*balls)
            except (NoIntersection, DegenerateCenters):
                assert not valid[k]
                continue
            assert valid[k]
            np.testing.assert_allclose(hi[k], s_hi, atol=1e-12)
            np.testing.assert_allclose(lo[k], s_lo, atol=1e-12)


class TestCircumcenter:
    def test_equilateral_unit(self):
        c, r = circumcenter_radius(vec3(0, 0, 0), vec3(1, 0, 0), vec3(0.5, np.sqrt(3) / 2, 0))
        assert r == pytest.approx(1 / np.sqrt(3), abs=1e-14)
        np.testing.assert_allclose(c, [0.5, np.sqrt(3) / 6, 0], atol=1e-14)

    def test_right_triangle_3_4_5(self):
        a, b, c = vec3(0, 0, 0), vec3(3, 0, 0), vec3(0, 4, 0)
        center, r = circumcenter_radius(a, b, c)
        assert r == pytest.approx(2.5, abs=1e-13)
        np.testing.assert_allclose(center, (b + c) / 2, atol=1e-13)  # hypotenuse midpoint

    def test_residual_oracle_random(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            tri = rng.normal(size=(3, 3))
            try:
                center, r = circumcenter_radius(*tri)
            except DegenerateTriangle:
                continue
            for v in tri:
                assert abs(np.linalg.norm(center - v) - r) < 1e-10 * max(1.0, r)

    def test_translation_invariance(self):
        rng = np.random.default_rng(9)
        tri = rng.normal(size=(3, 3))
        shift = vec3(100, -50, 7)
        c0, r0 = circumcenter_radius(*tri)
        c1, r1 = circumcenter_radius(*(tri + shift))
        assert r1 == pytest.approx(r0, rel=1e-9)
        np.testing.assert_allclose(c1 - shift, c0, atol=1e-7)

    def test_collinear_raises(self):
        with pytest.raises(DegenerateTriangle):
            circumcenter_radius(vec3(0, 0, 0), vec3(1, 1, 1), vec3(2, 2, 2))


class TestTriangleQuality:
    def test_equilateral(self):
        q = triangle_quality(vec3(0, 0, 0), vec3(1, 0, 0), vec3(0.5, np.sqrt(3) / 2, 0))
        assert q.min_angle == pytest.approx(np.pi / 3, abs=1e-12)
        assert q.max_angle == pytest.approx(np.pi / 3, abs=1e-12)
        assert q.edge_ratio == pytest.approx(1.0, abs=1e-12)
        assert q.altitude_ratio == pytest.approx(np.sqrt(3) / 2, abs=1e-12)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateTriangle):
            triangle_quality(vec3(0, 0, 0), vec3(1, 0, 0), vec3(2, 0, 0))

    @settings(max_examples=100)
    @given(st.integers(0, 2**32 - 1))
    def test_angles_sum_to_pi(self, seed):
        tri = np.random.default_rng(seed).normal(size=(3, 3))
        try:
            q = triangle_quality(*tri)
        except DegenerateTriangle:
            return
        # min + max + middle = pi; reconstruct middle from the law of cosines
        mids = []
        e = q.edges
        for k in range(3):
            o, p, qq = e[k], e[(k + 1) % 3], e[(k + 2) % 3]
            mids.append(np.arccos(np.clip((p * p + qq * qq - o * o) / (2 * p * qq), -1, 1)))
        assert sum(mids) == pytest.approx(np.pi, abs=1e-9)
        assert q.min_angle <= q.max_angle
        assert q.edge_ratio >= 1.0


class TestEquidistantPoint:
    def test_regular_tetrahedron(self):
        pts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
        c = geom.equidistant_point(pts)
        np.testing.assert_allclose(c, [0, 0, 0], atol=1e-12)

    def test_cospherical_many(self):
        rng = np.random.default_rng(2)
        center = vec3(0.2, -0.4, 0.9)
        dirs = rng.normal(size=(7, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = center + 0.8 * dirs
        c = geom.equidistant_point(pts)
        np.testing.assert_allclose(c, center, atol=1e-9)

    def test_coplanar_returns_none(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        assert geom.equidistant_point(pts) is None
