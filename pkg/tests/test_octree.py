"""Tests for the size-field octree: Lipschitz extension, refinement bands,
box balance, point location, and interior seed placement."""

import numpy as np
import pytest

from vorocrust.balls import build_ball_index, build_surface_seeds
from vorocrust.bounds import interior_seed_bound, leaf_radius_band
from vorocrust.errors import DepthCapExceeded
from vorocrust.octree import (
    LeafSet,
    LfsField,
    OctreeBox,
    build_octree,
    default_root_box,
    lfs_extended,
    place_interior_seeds,
    verify_box_balance,
    verify_size_bands,
)
from vorocrust.sampling import generate_sample
from vorocrust.surfaces import Sphere

SPHERE = Sphere(1.0)
UNIT_ROOT = OctreeBox(center=np.array([0.5, 0.5, 0.5]), half_width=0.5, depth=0)


def constant_field(value):
    return lambda pts: np.full(len(pts), value)


@pytest.fixture(scope="module")
def sphere_run():
    samples = generate_sample(SPHERE, eps=0.1, sigma=0.75, rng_seed=11)
    idx = build_ball_index(samples)
    surface_seeds, _, _ = build_surface_seeds(idx, SPHERE)
    leaves = build_octree(samples)
    return samples, idx, surface_seeds, leaves


# ---------------------------------------------------------------------------
# Lipschitz size field


def test_lfs_extension_at_a_sample(sphere_run):
    samples, _, _, _ = sphere_run
    vals = LfsField(samples)(samples.positions[:5])
    np.testing.assert_allclose(vals, samples.lfs[:5], rtol=0, atol=0)


def test_lfs_extension_at_sphere_center(sphere_run):
    samples, _, _, _ = sphere_run
    assert lfs_extended(np.zeros(3), samples) == pytest.approx(2.0, rel=1e-12)


def test_lfs_extension_matches_brute_force(sphere_run):
    samples, _, _, _ = sphere_run
    rng = np.random.default_rng(0)
    q = rng.uniform(-1.5, 1.5, (500, 3))
    brute = (
        np.linalg.norm(q[:, None, :] - samples.positions[None], axis=2)
        + samples.lfs[None]
    ).min(axis=1)
    np.testing.assert_allclose(LfsField(samples)(q), brute, rtol=1e-12, atol=1e-12)


def test_lfs_extension_is_one_lipschitz(sphere_run):
    samples, _, _, _ = sphere_run
    rng = np.random.default_rng(1)
    a = rng.uniform(-1.5, 1.5, (300, 3))
    b = a + rng.normal(scale=0.2, size=(300, 3))
    f = LfsField(samples)
    lhs = np.abs(f(a) - f(b))
    rhs = np.linalg.norm(a - b, axis=1)
    assert (lhs <= rhs + 1e-12).all()


# ---------------------------------------------------------------------------
# refinement arithmetic


def test_uniform_refinement_depth_four():
    leaves = build_octree(None, 0.1, UNIT_ROOT, size_field=constant_field(1.0))
    assert len(leaves) == 4096
    assert set(leaves.depths.tolist()) == {4}
    bal = verify_box_balance(leaves)
    assert bal["ok"] and bal["worst_ratio"] == 1.0


def test_coarse_refinement_single_split():
    leaves = build_octree(None, 0.9, UNIT_ROOT, size_field=constant_field(1.0))
    assert len(leaves) == 8
    assert set(leaves.depths.tolist()) == {1}


def test_leaf_diagonal_band_uniform():
    delta = 0.1
    leaves = build_octree(None, delta, UNIT_ROOT, size_field=constant_field(1.0))
    lo, hi = leaf_radius_band(delta)
    r = leaves.radii
    assert (r >= lo - 1e-12).all() and (r <= hi + 1e-12).all()
    report = verify_size_bands(leaves, None, delta, size_field=constant_field(1.0), n_points=2000)
    assert report["ok"]


def test_depth_cap_raises():
    with pytest.raises(DepthCapExceeded):
        build_octree(None, 0.1, UNIT_ROOT, size_field=constant_field(1e-9), depth_cap=6)


# ---------------------------------------------------------------------------
# balance


def test_unbalanced_cells_detected():
    # one root octant refined two levels deeper than its siblings
    ic = [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1) if (x, y, z) != (0, 0, 0)]
    depths = [1] * 7
    ic += [[x, y, z] for x in range(4) for y in range(4) for z in range(4)]
    depths += [3] * 64
    leaves = LeafSet.from_cells(np.zeros(3), 1.0, ic, depths)
    report = verify_box_balance(leaves)
    assert not report["ok"]
    assert report["worst_ratio"] == pytest.approx(4.0)


def test_sphere_run_balance_and_bands(sphere_run):
    samples, _, _, leaves = sphere_run
    bal = verify_box_balance(leaves)
    assert bal["ok"]
    assert bal["worst_ratio"] <= 2.0
    bands = verify_size_bands(leaves, samples, n_points=10_000)
    assert bands["ok"]
    assert bands["points_located"] == 10_000


def test_sphere_run_frozen_shape(sphere_run):
    _, _, _, leaves = sphere_run
    assert len(leaves) == 2591
    assert leaves.max_depth == 4
    assert set(leaves.depths.tolist()) == {3, 4}


# ---------------------------------------------------------------------------
# point location


def test_locate_round_trip(sphere_run):
    _, _, _, leaves = sphere_run
    rng = np.random.default_rng(3)
    pts = leaves.root_min + rng.random((5000, 3)) * leaves.root_side
    li = leaves.locate(pts)
    assert (li >= 0).all()
    overshoot = np.abs(pts - leaves.centers[li]).max(axis=1) - leaves.half_widths[li]
    assert overshoot.max() <= 1e-12


def test_locate_outside_root(sphere_run):
    _, _, _, leaves = sphere_run
    li = leaves.locate(np.array([[10.0, 0.0, 0.0], [-9.0, 9.0, 9.0]]))
    assert li.tolist() == [-1, -1]


def test_locate_leaf_centers_identity(sphere_run):
    _, _, _, leaves = sphere_run
    li = leaves.locate(leaves.centers)
    assert np.array_equal(li, np.arange(len(leaves)))


# ---------------------------------------------------------------------------
# interior seeds


def test_interior_seed_conditions(sphere_run):
    samples, idx, surface_seeds, leaves = sphere_run
    seeds = place_interior_seeds(leaves, surface_seeds, idx, SPHERE)
    assert len(seeds) == 221
    assert (seeds.kinds == 2).all()
    assert (seeds.origins[:, 1:] == -1).all()
    lid = seeds.origins[:, 0]
    assert (np.diff(lid) > 0).all()  # one seed per leaf, ascending leaf id

    # (a) no surface seed inside any seeded leaf's closed box
    c, hw = leaves.centers[lid], leaves.half_widths[lid]
    for k in range(len(seeds)):
        inside = np.abs(surface_seeds.positions - c[k]).max(axis=1) <= hw[k]
        assert not inside.any()
    # (b) all centers strictly inside the surface
    assert (SPHERE.signed_side_batch(seeds.positions) == -1).all()
    # (c) all centers outside every surface ball
    D = np.linalg.norm(seeds.positions[:, None, :] - idx.positions[None], axis=2)
    assert (D - idx.radii[None]).min() > 0.0
    # seeds are the centers of their leaves
    np.testing.assert_allclose(seeds.positions, c, atol=0)


def test_interior_seed_leaf_marking(sphere_run):
    _, idx, surface_seeds, leaves = sphere_run
    place_interior_seeds(leaves, surface_seeds, idx, SPHERE)
    marked = leaves.contains_surface_seed
    hit = leaves.locate(surface_seeds.positions)
    assert (hit >= 0).all()
    assert marked[hit].all()


def test_interior_seed_separation(sphere_run):
    _, idx, surface_seeds, leaves = sphere_run
    seeds = place_interior_seeds(leaves, surface_seeds, idx, SPHERE)
    sides = 2.0 * leaves.half_widths[seeds.origins[:, 0]]
    diff = np.linalg.norm(
        seeds.positions[:, None, :] - seeds.positions[None, :, :], axis=2
    )
    np.fill_diagonal(diff, np.inf)
    floor = np.minimum(sides[:, None], sides[None, :])
    assert (diff >= floor - 1e-12).all()


def test_union_exclusion_flag(sphere_run):
    _, idx, surface_seeds, leaves = sphere_run
    strict = place_interior_seeds(leaves, surface_seeds, idx, SPHERE)
    loose = place_interior_seeds(leaves, surface_seeds, idx, SPHERE, allow_in_union=True)
    assert len(loose) == 313
    assert len(loose) > len(strict)
    strict_ids = set(strict.origins[:, 0].tolist())
    loose_ids = set(loose.origins[:, 0].tolist())
    assert strict_ids < loose_ids
    # every extra seed really does sit inside some ball
    extra = sorted(loose_ids - strict_ids)
    pos = leaves.centers[extra]
    D = np.linalg.norm(pos[:, None, :] - idx.positions[None], axis=2)
    assert ((D - idx.radii[None]).min(axis=1) < 0).all()


def test_interior_seed_determinism(sphere_run):
    samples, idx, surface_seeds, _ = sphere_run
    a = place_interior_seeds(build_octree(samples), surface_seeds, idx, SPHERE)
    b = place_interior_seeds(build_octree(samples), surface_seeds, idx, SPHERE)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert a.origins.tobytes() == b.origins.tobytes()


def test_interior_seed_budget(sphere_run):
    samples, idx, surface_seeds, leaves = sphere_run
    seeds = place_interior_seeds(leaves, surface_seeds, idx, SPHERE)
    f = LfsField(samples)
    rng = np.random.default_rng(9)
    mc = rng.uniform(-1.0, 1.0, (200_000, 3))
    inside = np.linalg.norm(mc, axis=1) < 1.0
    integral = 8.0 * np.mean(inside * f(mc) ** -3.0)
    # the sampled extension dominates the analytic sizing 2 - |x|, whose
    # integral over the unit ball is 4*pi*(ln 2 - 5/16) ... = 2.4271
    assert integral < 2.4271
    assert len(seeds) <= interior_seed_bound(samples.eps, integral)


def test_default_root_box_covers_samples(sphere_run):
    samples, _, _, _ = sphere_run
    root = default_root_box(samples)
    margin_lo = samples.positions.min(axis=0) - (root.center - root.half_width)
    margin_hi = (root.center + root.half_width) - samples.positions.max(axis=0)
    need = 2.0 * samples.radius.max()
    assert (margin_lo >= need - 1e-12).all()
    assert (margin_hi >= need - 1e-12).all()
