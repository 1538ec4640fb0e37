"""Adaptive octree over the enclosed volume, sized by a Lipschitz extension
of the per-sample feature size, emitting interior seeds at empty leaf centers."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .balls import BallIndex
from .bounds import leaf_point_band, leaf_radius_band
from .errors import DepthCapExceeded
from .geom import TOL, Tolerance
from .sampling import SampleSet
from .seeds import KIND_INTERIOR, SeedSet
from .surfaces import Surface

SQRT3 = float(np.sqrt(3.0))
DEPTH_CAP = 24
# locate() packs three per-axis coordinates into one 64-bit interleaved key
_KEY_DEPTH_LIMIT = 21

_OCTANTS = np.array(
    [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.int64
)


# ---------------------------------------------------------------------------
# Lipschitz size field


class LfsField:
    """Pointwise-maximal 1-Lipschitz extension of the sampled feature size:
    f(x) = min_i (lfs_i + |x - p_i|), evaluated exactly with kNN pruning."""

    def __init__(self, samples: SampleSet):
        self.tree = cKDTree(samples.positions)
        self.lfs = np.asarray(samples.lfs, dtype=float)
        self.lfs_min = float(self.lfs.min())

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(self.lfs)
        out = np.empty(len(pts))
        unresolved = np.arange(len(pts))
        k = 4
        while len(unresolved):
            k_eff = min(k, n)
            d, j = self.tree.query(pts[unresolved], k=k_eff)
            if k_eff == 1:
                d, j = d[:, None], j[:, None]
            best = (d + self.lfs[j]).min(axis=1)
            if k_eff == n:
                out[unresolved] = best
                break
            # any unseen sample is at least as far as the k-th neighbour, so
            # its value is at least d_k + min(lfs): those rows are final
            done = d[:, -1] + self.lfs_min >= best
            out[unresolved[done]] = best[done]
            unresolved = unresolved[~done]
            k *= 4
        return out


def lfs_extended(points: np.ndarray, samples: SampleSet) -> np.ndarray:
    """Lipschitz-extended feature size of one or many points."""
    values = LfsField(samples)(points)
    return values if np.ndim(points) > 1 else float(values[0])


# ---------------------------------------------------------------------------
# leaf containers


@dataclass
class OctreeBox:
    center: np.ndarray
    half_width: float
    depth: int
    children: int = 0
    contains_surface_seed: bool = False

    @property
    def radius(self) -> float:
        """Half-diagonal of the box."""
        return self.half_width * SQRT3


@dataclass
class LeafSet:
    """Leaves of an octree as flat arrays, ordered by interleaved-bit key.

    Each leaf is identified by integer grid coordinates at its own depth; the
    row index in key order is the stable leaf id used by seed origins."""

    root_min: np.ndarray          # (3,)
    root_side: float
    icoords: np.ndarray           # (m, 3) int64, grid coords at each leaf's depth
    depths: np.ndarray            # (m,) int16
    max_depth: int
    keys: np.ndarray              # (m,) uint64, sorted ascending
    spans: np.ndarray             # (m,) uint64, 8**(max_depth - depth)
    contains_surface_seed: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.depths)

    @property
    def half_widths(self) -> np.ndarray:
        return self.root_side / np.exp2(self.depths.astype(float) + 1.0)

    @property
    def radii(self) -> np.ndarray:
        return self.half_widths * SQRT3

    @property
    def centers(self) -> np.ndarray:
        scale = (self.root_side / np.exp2(self.depths.astype(float)))[:, None]
        return self.root_min + (self.icoords.astype(float) + 0.5) * scale

    def __getitem__(self, i: int) -> OctreeBox:
        i = int(i)
        flag = bool(self.contains_surface_seed[i]) if self.contains_surface_seed is not None else False
        return OctreeBox(
            center=self.centers[i],
            half_width=float(self.half_widths[i]),
            depth=int(self.depths[i]),
            children=0,
            contains_surface_seed=flag,
        )

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Leaf id containing each point (-1 outside the root box)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), -1, dtype=np.int64)
        n_cells = 1 << self.max_depth
        rel = (pts - self.root_min) / self.root_side
        inside = np.all((rel >= 0.0) & (rel <= 1.0), axis=1)
        if not inside.any():
            return out
        g = np.clip((rel[inside] * n_cells).astype(np.int64), 0, n_cells - 1)
        key = _interleave(g)
        pos = np.searchsorted(self.keys, key, side="right") - 1
        ok = pos >= 0
        ok[ok] = key[ok] < self.keys[pos[ok]] + self.spans[pos[ok]]
        rows = np.flatnonzero(inside)
        out[rows[ok]] = pos[ok]
        return out

    @classmethod
    def from_cells(cls, root_min, root_side, icoords, depths):
        """Assemble a LeafSet from explicit cells (no refinement rule applied)."""
        icoords = np.asarray(icoords, dtype=np.int64)
        depths = np.asarray(depths, dtype=np.int16)
        max_depth = int(depths.max()) if len(depths) else 0
        if max_depth > _KEY_DEPTH_LIMIT:
            raise ValueError(f"depth {max_depth} exceeds locate key limit {_KEY_DEPTH_LIMIT}")
        keys = _interleave(icoords << (max_depth - depths.astype(np.int64))[:, None])
        spans = np.uint64(1) << (3 * (max_depth - depths.astype(np.int64))).astype(np.uint64)
        order = np.argsort(keys)
        return cls(
            root_min=np.asarray(root_min, dtype=float),
            root_side=float(root_side),
            icoords=icoords[order],
            depths=depths[order],
            max_depth=max_depth,
            keys=keys[order],
            spans=spans[order],
        )


def _interleave(g: np.ndarray) -> np.ndarray:
    """Interleave the low 21 bits of three int coordinates into uint64 keys."""

    def spread(x):
        x = x.astype(np.uint64) & np.uint64(0x1FFFFF)
        x = (x | (x << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
        x = (x | (x << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
        x = (x | (x << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
        x = (x | (x << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
        x = (x | (x << np.uint64(2))) & np.uint64(0x1249249249249249)
        return x

    return spread(g[:, 0]) | (spread(g[:, 1]) << np.uint64(1)) | (spread(g[:, 2]) << np.uint64(2))


# ---------------------------------------------------------------------------
# construction


def default_root_box(samples: SampleSet) -> OctreeBox:
    """Cubical bounding box of the samples, inflated by twice the largest
    ball radius on every face."""
    pos = samples.positions
    margin = 2.0 * float(samples.radius.max())
    lo = pos.min(axis=0) - margin
    hi = pos.max(axis=0) + margin
    center = (lo + hi) / 2.0
    half = float((hi - lo).max()) / 2.0
    return OctreeBox(center=center, half_width=half, depth=0)


def build_octree(
    samples: SampleSet,
    delta: float = None,
    root_box: OctreeBox = None,
    *,
    size_field=None,
    depth_cap: int = DEPTH_CAP,
    min_depth: int = 1,
) -> LeafSet:
    """Refine until every leaf's half-diagonal is at most delta times the
    Lipschitz-extended feature size at its center.  The root is always
    subdivided at least `min_depth` times."""
    if delta is None:
        delta = samples.delta
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if size_field is None:
        size_field = LfsField(samples)
    if root_box is None:
        root_box = default_root_box(samples)
    root_min = np.asarray(root_box.center, dtype=float) - root_box.half_width
    side = 2.0 * float(root_box.half_width)

    leaf_i, leaf_d = [], []
    level = np.zeros((1, 3), dtype=np.int64)
    depth = 0
    while len(level):
        scale = side / float(1 << depth)
        centers = root_min + (level.astype(float) + 0.5) * scale
        radius = (scale / 2.0) * SQRT3
        split = radius > delta * size_field(centers)
        if depth < min_depth:
            split[:] = True
        if split.any() and depth == depth_cap:
            raise DepthCapExceeded(
                f"octree refinement needs depth > {depth_cap} "
                f"({int(split.sum())} boxes still oversized)"
            )
        if (~split).any():
            leaf_i.append(level[~split])
            leaf_d.append(np.full(int((~split).sum()), depth, dtype=np.int16))
        level = (level[split][:, None, :] * 2 + _OCTANTS[None, :, :]).reshape(-1, 3)
        depth += 1

    icoords = np.concatenate(leaf_i)
    depths = np.concatenate(leaf_d)
    max_depth = int(depths.max())
    if max_depth > _KEY_DEPTH_LIMIT:
        raise DepthCapExceeded(
            f"octree depth {max_depth} exceeds the locate key limit {_KEY_DEPTH_LIMIT}"
        )
    return LeafSet.from_cells(root_min, side, icoords, depths)


# ---------------------------------------------------------------------------
# interior seeds


def place_interior_seeds(
    leaves: LeafSet,
    surface_seeds: SeedSet,
    idx: BallIndex,
    surface: Surface,
    *,
    allow_in_union: bool = False,
    tol: Tolerance = TOL,
) -> SeedSet:
    """One interior seed at the center of every leaf whose closed box holds no
    surface seed, whose center is inside the surface, and (unless allowed)
    whose center lies outside the ball union."""
    m = len(leaves)
    contains = np.zeros(m, dtype=bool)
    if len(surface_seeds):
        sp = surface_seeds.positions
        nudge = tol.band(leaves.root_side)
        offsets = np.concatenate([np.zeros((1, 3)), nudge * np.eye(3), -nudge * np.eye(3)])
        for off in offsets:
            hit = leaves.locate(sp + off)
            contains[hit[hit >= 0]] = True
    leaves.contains_surface_seed = contains

    centers = leaves.centers
    keep = ~contains
    rows = np.flatnonzero(keep)
    side_vals = surface.signed_side_batch(centers[rows], tol)
    rows = rows[side_vals == -1]

    if not allow_in_union and len(rows):
        pts = centers[rows]
        tree = cKDTree(idx.positions)
        r_max = float(idx.radii.max())
        band = tol.band(r_max)
        d1, _ = tree.query(pts, k=1)
        suspect = np.flatnonzero(d1 < r_max + band)
        in_union = np.zeros(len(rows), dtype=bool)
        for s in suspect:
            near = tree.query_ball_point(pts[s], r_max + band)
            dd = np.linalg.norm(idx.positions[near] - pts[s], axis=1)
            in_union[s] = bool((dd < idx.radii[near] + band).any())
        rows = rows[~in_union]

    origins = np.full((len(rows), 3), -1, dtype=np.int64)
    origins[:, 0] = rows
    return SeedSet(
        positions=centers[rows],
        kinds=np.full(len(rows), KIND_INTERIOR, dtype=np.int8),
        origins=origins,
    )


# ---------------------------------------------------------------------------
# verification


def verify_box_balance(leaves: LeafSet, tol: Tolerance = TOL) -> dict:
    """Half-width ratio of every pair of touching (corner-adjacent) leaves
    must lie in [1/2, 2]."""
    centers = leaves.centers
    hw = leaves.half_widths
    band = tol.band(leaves.root_side)
    tree = cKDTree(centers)
    pairs = tree.query_pairs(2.0 * SQRT3 * float(hw.max()) + band, output_type="ndarray")
    if len(pairs) == 0:
        return {"ok": True, "worst_ratio": 1.0, "pairs_checked": 0}
    i, j = pairs[:, 0], pairs[:, 1]
    gap = np.abs(centers[i] - centers[j]).max(axis=1)
    touching = gap <= hw[i] + hw[j] + band
    i, j = i[touching], j[touching]
    ratios = hw[i] / hw[j]
    ratios = np.maximum(ratios, 1.0 / ratios)
    worst = float(ratios.max()) if len(ratios) else 1.0
    return {
        "ok": worst <= 2.0 + 1e-12,
        "worst_ratio": worst,
        "pairs_checked": int(len(ratios)),
    }


def verify_size_bands(
    leaves: LeafSet,
    samples: SampleSet,
    delta: float = None,
    *,
    size_field=None,
    n_points: int = 10_000,
    rng_seed: int = 0,
    tol: Tolerance = TOL,
) -> dict:
    """Leaf half-diagonal against the size field: per-center band at every
    leaf, per-point band at random points inside the volume."""
    if delta is None:
        delta = samples.delta
    if size_field is None:
        size_field = LfsField(samples)
    band = tol.band(leaves.root_side)

    lo_c, hi_c = leaf_radius_band(delta)
    r = leaves.radii
    f_c = size_field(leaves.centers)
    b1 = (r >= lo_c * f_c - band) & (r <= hi_c * f_c + band)

    rng = np.random.default_rng(rng_seed)
    pts = leaves.root_min + rng.random((n_points, 3)) * leaves.root_side
    li = leaves.locate(pts)
    ok_rows = li >= 0
    lo_p, hi_p = leaf_point_band(delta)
    r_p = leaves.radii[li[ok_rows]]
    f_p = size_field(pts[ok_rows])
    b2 = (r_p >= lo_p * f_p - band) & (r_p <= hi_p * f_p + band)

    return {
        "ok": bool(b1.all() and b2.all() and ok_rows.all()),
        "center_band_ok": bool(b1.all()),
        "point_band_ok": bool(b2.all()),
        "points_located": int(ok_rows.sum()),
        "center_violations": int((~b1).sum()),
        "point_violations": int((~b2).sum()),
    }
