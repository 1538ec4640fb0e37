"""Unweighted Voronoi cells by incremental bisector clipping; volume mesh and
surface extraction.

The cell of a seed ``s`` starts as the clip box and is cut by the bisector
half-space against each other seed ``t``, visited in increasing distance from
``s``.  Let ``R`` be the distance from ``s`` to its farthest current cell
vertex.  Any seed ``t`` with ``|t - s| > 2R`` cannot clip the cell: for every
current cell point ``x`` (within ``R`` of ``s`` by convexity),
``|x - t| >= |t - s| - |x - s| > 2R - R >= |x - s|``, so ``x`` stays on the
kept side of the bisector.  Because candidates arrive in ascending distance
and ``R`` only shrinks, the first candidate beyond ``2R`` certifies that the
clipped polytope equals the true Voronoi cell intersected with the clip box;
if the candidate stream exhausts first, the cell is certified by exhaustion.

Cells are computed independently per seed (the seed index is shared
read-only) and the output ordering is by seed id, so a run is deterministic.
Faces are built from the exact bisector planes, never refit, which keeps them
planar by construction.  Clip-box faces carry the neighbor id ``BOUNDARY``;
touching the clip box is legal only for Upper cells — the volume mesh keeps
only Lower and Interior cells, which are interior to the seed cloud and
bounded.

The surface reconstruction collects every face separating a Lower cell from
an Upper cell, oriented out of the Lower cell, and welds coincident vertices
across cells into a shared pool.  Vertices that coincide with an input sample
point are tagged ``PROV_SAMPLE``; the rest (cell corners created away from
the sample set, e.g. at sliver welds) are ``PROV_STEINER``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateCell, EmptyCell, UnboundedCell
from .geom import TOL, Tolerance
from .sampling import SampleSet
from .seeds import KIND_LOWER, KIND_UPPER, SeedSet

__all__ = [
    "BOUNDARY",
    "PROV_SAMPLE",
    "PROV_STEINER",
    "SAMPLE_MATCH_REL",
    "CellFace",
    "VoronoiCell",
    "SeedIndex",
    "compute_cell",
    "VoronoiMesh",
    "compute_mesh",
    "SurfaceFacet",
    "ReconSurface",
    "extract_surface",
    "default_clip_box",
    "as_box",
]

BOUNDARY = -1           # face neighbor id for clip-box faces
PROV_SAMPLE = 0         # reconstruction vertex coincides with an input sample
PROV_STEINER = 1        # reconstruction vertex created by the diagram itself
SAMPLE_MATCH_REL = 1e-8  # |vertex - sample| <= rel * lfs(sample) counts as coincident


# --------------------------------------------------------------------------
# clip box helpers
# --------------------------------------------------------------------------

def as_box(box) -> np.ndarray:
    """Normalize a clip box to a (2, 3) float array [[min], [max]]."""
    b = np.asarray(box, dtype=float)
    if b.shape != (2, 3):
        raise ValueError("clip box must have shape (2, 3): [min_corner, max_corner]")
    if not (b[1] > b[0]).all():
        raise ValueError("clip box must have positive extent on every axis")
    return b


def default_clip_box(points, margin_factor: float = 0.05) -> np.ndarray:
    """Axis-aligned bounding box of the points, padded by a fraction of its size.

    A snug box keeps the outermost (Upper) cells short, which lets the
    security radius fire early; any positive margin is legal because Upper
    cells may be truncated by the box.
    """
    P = np.asarray(points, dtype=float)
    lo = P.min(axis=0)
    hi = P.max(axis=0)
    pad = margin_factor * max(float((hi - lo).max()), 1.0)
    return np.array([lo - pad, hi + pad])


# Box corners indexed so faces below are ccw loops viewed from outside.
_BOX_CORNERS = np.array(
    [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ]
)
_BOX_LOOPS = [
    [0, 3, 2, 1],  # z = lo, outward -z
    [4, 5, 6, 7],  # z = hi, outward +z
    [0, 1, 5, 4],  # y = lo, outward -y
    [1, 2, 6, 5],  # x = hi, outward +x
    [2, 3, 7, 6],  # y = hi, outward +y
    [3, 0, 4, 7],  # x = lo, outward -x
]
_BOX_NORMALS = np.array(
    [
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
    ]
)


# --------------------------------------------------------------------------
# cell data types
# --------------------------------------------------------------------------

@dataclass
class CellFace:
    """One planar cell face: ccw-outward vertex loop on the plane n.x <= c."""

    loop: np.ndarray     # (k,) int32 indices into the cell vertex array
    neighbor: int        # neighbor seed id, or BOUNDARY for clip-box faces
    normal: np.ndarray   # (3,) unit outward normal
    plane_offset: float  # c in n.x <= c


@dataclass
class VoronoiCell:
    """Convex Voronoi cell stored as flat loop arrays (one row per face).

    ``faces`` materializes :class:`CellFace` objects on demand; the flat
    arrays are the storage of record so a large mesh stays compact.
    """

    seed_id: int
    vertices: np.ndarray        # (nv, 3)
    flat_loops: np.ndarray      # (m,) int32, concatenated face loops
    loop_offsets: np.ndarray    # (nf + 1,) int32
    face_neighbors: np.ndarray  # (nf,) int64, BOUNDARY for box faces
    face_normals: np.ndarray    # (nf, 3) unit outward
    face_offsets: np.ndarray    # (nf,) float, plane constants c
    outradius: float | None = None
    inradius: float | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.face_neighbors)

    @property
    def touches_boundary(self) -> bool:
        return bool((self.face_neighbors == BOUNDARY).any())

    def loop(self, i: int) -> np.ndarray:
        return self.flat_loops[self.loop_offsets[i]:self.loop_offsets[i + 1]]

    def loops(self):
        for i in range(self.n_faces):
            yield self.loop(i)

    @property
    def faces(self) -> list[CellFace]:
        return [
            CellFace(
                loop=self.loop(i).copy(),
                neighbor=int(self.face_neighbors[i]),
                normal=self.face_normals[i].copy(),
                plane_offset=float(self.face_offsets[i]),
            )
            for i in range(self.n_faces)
        ]

    def volume(self) -> float:
        """Signed volume by the divergence theorem; positive iff outward-oriented."""
        total = 0.0
        V = self.vertices
        for lo in self.loops():
            W = V[lo]
            a = W[0]
            cr = np.cross(W[1:-1], W[2:])
            total += float((cr @ a).sum())
        return total / 6.0

    def face_areas(self) -> np.ndarray:
        areas = np.empty(self.n_faces)
        V = self.vertices
        for i in range(self.n_faces):
            W = V[self.loop(i)]
            cr = np.cross(W[1:-1] - W[0], W[2:] - W[0]).sum(axis=0)
            areas[i] = 0.5 * float(np.linalg.norm(cr))
        return areas

    def contains(self, points, band: float = 0.0) -> np.ndarray:
        """True where a point satisfies every face inequality n.x <= c + band."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        S = P @ self.face_normals.T - self.face_offsets
        return (S <= band).all(axis=1)

    def planarity_residual(self) -> float:
        """Largest |n.v - c| over all face vertices (0 for exact planes)."""
        worst = 0.0
        for i in range(self.n_faces):
            W = self.vertices[self.loop(i)]
            r = np.abs(W @ self.face_normals[i] - self.face_offsets[i]).max()
            worst = max(worst, float(r))
        return worst


# --------------------------------------------------------------------------
# the cut engine
# --------------------------------------------------------------------------

class _Poly:
    """Mutable convex polytope under successive half-space cuts.

    Vertices live in a growing buffer; faces are small python lists of vertex
    ids, each with its defining plane (unit normal, offset) and neighbor id.
    """

    __slots__ = ("V", "nv", "band", "faces", "nbs", "nrms", "cs",
                 "_R", "_used_set", "_used_arr", "_W")

    def __init__(self, box: np.ndarray, band: float):
        self.V = np.empty((64, 3))
        corners = box[0] + _BOX_CORNERS * (box[1] - box[0])
        self.V[:8] = corners
        self.nv = 8
        self.band = band
        self.faces = [list(lo) for lo in _BOX_LOOPS]
        self.nbs = [BOUNDARY] * 6
        self.nrms = [_BOX_NORMALS[i] for i in range(6)]
        self.cs = [float(_BOX_NORMALS[i] @ corners[_BOX_LOOPS[i][0]]) for i in range(6)]
        self._R: float | None = None
        self._used_set = set(range(8))
        self._used_arr: np.ndarray | None = None
        self._W: np.ndarray | None = None

    def _add_vertex(self, p) -> int:
        if self.nv == len(self.V):
            grown = np.empty((2 * len(self.V), 3))
            grown[: self.nv] = self.V
            self.V = grown
        self.V[self.nv] = p
        self.nv += 1
        return self.nv - 1

    def used(self):
        """Cached (ids, coords) of the vertices referenced by current faces."""
        if self._used_arr is None:
            self._used_arr = np.fromiter(
                sorted(self._used_set), dtype=np.int64, count=len(self._used_set)
            )
            self._W = self.V[self._used_arr]
        return self._used_arr, self._W

    def max_dist(self, s: np.ndarray) -> float:
        if self._R is None:
            _, W = self.used()
            d2 = ((W - s) ** 2).sum(axis=1)
            self._R = float(np.sqrt(d2.max()))
        return self._R

    def cut(self, n: np.ndarray, c: float, neighbor: int) -> bool:
        """Clip by the half-space n.x <= c; returns True when anything changed."""
        band = self.band
        used_arr, W = self.used()
        side_u = W @ n - c
        if not (side_u > band).any():
            return False
        if not (side_u < -band).any():
            raise EmptyCell(
                f"half-space cut (neighbor {neighbor}) removed the whole cell"
            )
        side = np.empty(self.nv)
        side[used_arr] = side_u
        above_arr = np.zeros(self.nv, dtype=bool)
        above_arr[used_arr] = side_u > band
        below_arr = np.zeros(self.nv, dtype=bool)
        below_arr[used_arr] = side_u < -band
        above = above_arr.tolist()
        below = below_arr.tolist()

        xcache: dict[tuple[int, int], int] = {}

        def crossing(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            v = xcache.get(key)
            if v is None:
                sa, sb = side[a], side[b]
                t = sa / (sa - sb)
                v = self._add_vertex(self.V[a] + t * (self.V[b] - self.V[a]))
                xcache[key] = v
            return v

        new_faces: list[list[int]] = []
        new_nbs: list[int] = []
        new_nrms: list[np.ndarray] = []
        new_cs: list[float] = []
        cap_edges: dict[int, int] = {}  # entry vertex -> exit vertex

        for fi, lo in enumerate(self.faces):
            ab = [above[v] for v in lo]
            if not any(ab):
                new_faces.append(lo)
                new_nbs.append(self.nbs[fi])
                new_nrms.append(self.nrms[fi])
                new_cs.append(self.cs[fi])
                continue
            if all(ab):
                continue  # face entirely removed
            k = len(lo)
            starts = [i for i in range(k) if not ab[i] and ab[i - 1]]
            if len(starts) != 1:
                raise DegenerateCell("clip arc is not contiguous on a face loop")
            j = starts[0]
            rot = lo[j:] + lo[:j]
            m = k - sum(ab)
            keeps = rot[:m]
            if any(above[v] for v in keeps):
                raise DegenerateCell("clip arc is not contiguous on a face loop")
            last_keep, first_keep = keeps[-1], keeps[0]
            first_above, last_above = rot[m], rot[-1]
            emitted = list(keeps)
            if below[last_keep]:
                exit_tok = crossing(last_keep, first_above)
                emitted.append(exit_tok)
            else:
                exit_tok = last_keep  # loop leaves the plane through an on-vertex
            if below[first_keep]:
                entry_tok = crossing(last_above, first_keep)
                emitted.append(entry_tok)
            else:
                entry_tok = first_keep
            if len(emitted) >= 3:
                new_faces.append(emitted)
                new_nbs.append(self.nbs[fi])
                new_nrms.append(self.nrms[fi])
                new_cs.append(self.cs[fi])
            if entry_tok != exit_tok:
                if entry_tok in cap_edges:
                    raise DegenerateCell("cap boundary is not a simple cycle")
                cap_edges[entry_tok] = exit_tok

        if len(cap_edges) < 3:
            raise DegenerateCell("cut produced no usable cap polygon")
        start = next(iter(cap_edges))
        cap = [start]
        cur = cap_edges[start]
        while cur != start:
            cap.append(cur)
            nxt = cap_edges.get(cur)
            if nxt is None or len(cap) > len(cap_edges):
                raise DegenerateCell("cap boundary did not close into one cycle")
            cur = nxt
        if len(cap) != len(cap_edges):
            raise DegenerateCell("cap boundary did not close into one cycle")
        new_faces.append(cap)
        new_nbs.append(neighbor)
        new_nrms.append(n)
        new_cs.append(c)

        if len(new_faces) < 4:
            raise EmptyCell("cell degenerated to fewer than four faces")
        self.faces = new_faces
        self.nbs = new_nbs
        self.nrms = new_nrms
        self.cs = new_cs
        used = set()
        for lo in new_faces:
            used.update(lo)
        self._used_set = used
        self._used_arr = None
        self._W = None
        self._R = None
        return True

    def finalize(self, seed_id: int, tol: Tolerance) -> VoronoiCell:
        """Compact, snap well-conditioned degree-3 vertices, canonicalize loops."""
        ids = sorted(self._used_set)
        remap = {v: i for i, v in enumerate(ids)}
        Vc = self.V[ids].copy()
        loops = [[remap[v] for v in lo] for lo in self.faces]

        # vertex -> incident faces (distinct planes by construction)
        incident: list[list[int]] = [[] for _ in ids]
        for fi, lo in enumerate(loops):
            for v in lo:
                incident[v].append(fi)

        nrms = np.array(self.nrms)
        cs = np.array(self.cs)
        deg3 = [v for v, fs in enumerate(incident) if len(fs) == 3]
        if deg3:
            rows = np.array([incident[v] for v in deg3])
            A = nrms[rows]                      # (k, 3, 3)
            b = cs[rows]                        # (k, 3)
            det = np.abs(np.linalg.det(A))
            good = det > 1e-6
            if good.any():
                x = np.linalg.solve(A[good], b[good][..., None])[..., 0]
                sel = np.array(deg3)[good]
                moved = np.linalg.norm(x - Vc[sel], axis=1)
                ok = moved <= 64.0 * self.band
                Vc[sel[ok]] = x[ok]

        # canonical rotation: every loop starts at its smallest vertex id
        flat: list[int] = []
        offsets = [0]
        for lo in loops:
            j = lo.index(min(lo))
            flat.extend(lo[j:] + lo[:j])
            offsets.append(len(flat))

        return VoronoiCell(
            seed_id=seed_id,
            vertices=Vc,
            flat_loops=np.array(flat, dtype=np.int32),
            loop_offsets=np.array(offsets, dtype=np.int32),
            face_neighbors=np.array(self.nbs, dtype=np.int64),
            face_normals=nrms,
            face_offsets=cs,
        )


# --------------------------------------------------------------------------
# seed index and per-cell computation
# --------------------------------------------------------------------------

class SeedIndex:
    """Read-only spatial index over deduplicated seeds.

    Accepts a :class:`SeedSet` (kinds enable the bounded-cell check) or a bare
    (n, 3) position array for geometric toys.
    """

    def __init__(self, seeds, tol: Tolerance = TOL):
        if isinstance(seeds, SeedSet):
            self.seeds = seeds
            self.positions = np.ascontiguousarray(seeds.positions, dtype=float)
            self.kinds = seeds.kinds
        else:
            self.seeds = None
            self.positions = np.ascontiguousarray(seeds, dtype=float)
            self.kinds = None
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("seed positions must have shape (n, 3)")
        self.n = len(self.positions)
        if self.n == 0:
            raise ValueError("cannot index an empty seed set")
        extent = self.positions.max(axis=0) - self.positions.min(axis=0)
        self.scale = max(float(np.linalg.norm(extent)), 1.0)
        self.tree = cKDTree(self.positions)
        dup = self.tree.query_pairs(tol.band(self.scale))
        if dup:
            raise ValueError(
                f"seeds are not deduplicated: {len(dup)} coincident pair(s), "
                f"e.g. {sorted(dup)[0]}"
            )

    _EXHAUST_K = 2048   # stop growing k-NN restarts past this many candidates
    _CHUNK = 8192       # exhaust-phase block size (bounds screen matmul memory)

    def candidate_blocks(self, i: int, k0: int = 32):
        """Yield (distances, ids) blocks covering every seed except ``i`` once.

        Distances ascend within each block and never decrease across blocks
        (exact ties may straddle a block boundary).  Restarting the k-nearest
        query with a larger k may reorder exactly tied distances (regular
        seed grids produce many), so already-yielded ids are tracked by
        identity rather than by a prefix pointer.  Once the restarts pass
        ``_EXHAUST_K`` candidates, the remainder is served from one direct
        distance sort, sliced into fixed-size chunks.
        """
        if self.n == 1:
            return
        x = self.positions[i]
        seen = np.zeros(self.n, dtype=bool)
        seen[i] = True
        k = min(k0, self.n)
        while True:
            d, idx = self.tree.query(x, k=k)
            d, idx = np.atleast_1d(d), np.atleast_1d(idx)
            fresh = ~seen[idx]
            if fresh.any():
                js = idx[fresh]
                seen[js] = True
                yield d[fresh], js
            if k >= self.n:
                return
            if k >= self._EXHAUST_K:
                break
            k = min(4 * k, self.n)
        js = np.flatnonzero(~seen)
        if len(js) == 0:
            return
        d = np.linalg.norm(self.positions[js] - x, axis=1)
        order = np.argsort(d, kind="stable")
        js, d = js[order], d[order]
        for a in range(0, len(js), self._CHUNK):
            yield d[a : a + self._CHUNK], js[a : a + self._CHUNK]


def compute_cell(
    seed_id: int,
    seed_index: SeedIndex,
    clip_box,
    tol: Tolerance = TOL,
    enforce_bounded: bool = True,
) -> VoronoiCell:
    """Clip the Voronoi cell of one seed out of the clip box.

    Bisectors are applied in ascending neighbor distance until the security
    radius certifies completion (see module docstring).  Raises
    :class:`EmptyCell` if a cut empties the cell (impossible for distinct
    seeds inside the box: a tolerance failure) and :class:`UnboundedCell`
    when a non-Upper cell still touches the clip box.
    """
    box = as_box(clip_box)
    P = seed_index.positions
    s = P[seed_id]
    band = tol.band(float(np.linalg.norm(box[1] - box[0])))
    if not ((s > box[0] + band).all() and (s < box[1] - band).all()):
        raise ValueError(f"seed {seed_id} is not strictly inside the clip box")

    poly = _Poly(box, band)
    done = False
    for ds, js in seed_index.candidate_blocks(seed_id):
        if ds[0] > 2.0 * poly.max_dist(s):
            break  # security radius reached: no farther seed can cut
        T = P[js]
        U = T - s
        L = np.sqrt((U * U).sum(axis=1))
        N = U / L[:, None]
        C = (N * (0.5 * (s + T))).sum(axis=1)
        # One matmul screens the whole block.  A bisector that leaves every
        # current cell vertex at least band/2 inside is a no-op now and stays
        # one, because later cuts only shrink the cell; the half-band margin
        # keeps the screen's rounding from ever dropping a real cut.
        _, W = poly.used()
        alive = np.flatnonzero((W @ N.T).max(axis=0) - C > 0.5 * band)
        for m in alive:
            if ds[m] > 2.0 * poly.max_dist(s):
                done = True  # security radius: no candidate from here can cut
                break
            poly.cut(N[m], float(C[m]), int(js[m]))
        if done:
            break

    cell = poly.finalize(seed_id, tol)
    if (
        enforce_bounded
        and seed_index.kinds is not None
        and seed_index.kinds[seed_id] != KIND_UPPER
        and cell.touches_boundary
    ):
        raise UnboundedCell(
            f"cell of non-Upper seed {seed_id} touches the clip box"
        )
    return cell


# --------------------------------------------------------------------------
# whole-diagram computation
# --------------------------------------------------------------------------

@dataclass
class VoronoiMesh:
    """All cells of a seed set, plus the volume-mesh subset (Lower + Interior)."""

    seeds: SeedSet
    clip_box: np.ndarray
    cells: list[VoronoiCell]
    volume_cell_ids: np.ndarray  # ascending seed ids with kind Lower or Interior
    mirror_stats: dict

    @property
    def volume_cells(self) -> list[VoronoiCell]:
        return [self.cells[i] for i in self.volume_cell_ids]

    def volume(self) -> float:
        """Total volume of the volume mesh (Lower + Interior cells)."""
        return sum(self.cells[i].volume() for i in self.volume_cell_ids)


def _mirror_stats(cells: list[VoronoiCell], band: float) -> dict:
    """Check that every internal face (a -> b) has a partner face (b -> a)."""
    owners = []
    nbs = []
    for cell in cells:
        mask = cell.face_neighbors != BOUNDARY
        k = int(mask.sum())
        if k:
            owners.append(np.full(k, cell.seed_id, dtype=np.int64))
            nbs.append(cell.face_neighbors[mask])
    if not owners:
        return {"internal_faces": 0, "paired_fraction": 1.0, "unpaired": 0}
    a = np.concatenate(owners)
    b = np.concatenate(nbs)
    n = max(int(a.max()), int(b.max())) + 1
    keys = np.sort(a * n + b)
    partners = b * n + a
    paired = keys[np.searchsorted(keys, partners).clip(max=len(keys) - 1)] == partners
    unpaired = int((~paired).sum())
    if unpaired:
        # tolerate only zero-area tie artifacts (a grazing bisector registered
        # on one side of the tolerance band but not the other)
        tiny = (8 * band) ** 2
        bad = 0
        examples = []
        cell_by_id = {c.seed_id: c for c in cells}
        for ai, bi in zip(a[~paired], b[~paired]):
            cell = cell_by_id[int(ai)]
            fi = int(np.nonzero(cell.face_neighbors == bi)[0][0])
            area = cell.face_areas()[fi]
            if area > tiny:
                bad += 1
                if len(examples) < 3:
                    examples.append((int(ai), int(bi), float(area)))
        if bad:
            raise DegenerateCell(
                f"{bad} internal face(s) lack a mirror partner, e.g. {examples}"
            )
    return {
        "internal_faces": int(len(a)),
        "paired_fraction": float(paired.mean()),
        "unpaired": unpaired,
    }


def compute_mesh(
    seeds: SeedSet,
    clip_box=None,
    tol: Tolerance = TOL,
    enforce_bounded: bool = True,
) -> VoronoiMesh:
    """Compute every cell (ordered by seed id) and select the volume mesh.

    The volume mesh keeps cells whose seed kind is Lower or Interior.  All
    internal faces are checked for mirror consistency: the face (a -> b) must
    reappear as (b -> a) in the neighbor's cell.
    """
    index = SeedIndex(seeds, tol)
    if clip_box is None:
        clip_box = default_clip_box(index.positions)
    box = as_box(clip_box)
    cells = [
        compute_cell(i, index, box, tol, enforce_bounded=enforce_bounded)
        for i in range(index.n)
    ]
    volume_ids = np.flatnonzero(seeds.kinds != KIND_UPPER).astype(np.int64)
    band = tol.band(float(np.linalg.norm(box[1] - box[0])))
    stats = _mirror_stats(cells, band)
    return VoronoiMesh(
        seeds=seeds,
        clip_box=box,
        cells=cells,
        volume_cell_ids=volume_ids,
        mirror_stats=stats,
    )


# --------------------------------------------------------------------------
# surface reconstruction
# --------------------------------------------------------------------------

@dataclass
class SurfaceFacet:
    """One reconstruction facet: a Voronoi face between an Upper and a Lower cell."""

    loop: np.ndarray  # (k,) int64 indices into the shared vertex pool
    upper_seed_id: int
    lower_seed_id: int


@dataclass
class ReconSurface:
    """Surface reconstruction: Upper|Lower separating faces on a shared pool.

    Facet loops are oriented out of the Lower cell (toward the Upper seed).
    ``provenance`` is PROV_SAMPLE where the vertex coincides with an input
    sample (within SAMPLE_MATCH_REL * lfs), else PROV_STEINER; ``sample_ids``
    holds the matching sample row or -1.
    """

    vertices: np.ndarray      # (k, 3)
    flat_loops: np.ndarray    # (m,) int64
    loop_offsets: np.ndarray  # (nf + 1,) int64
    upper_seeds: np.ndarray   # (nf,) int64
    lower_seeds: np.ndarray   # (nf,) int64
    provenance: np.ndarray    # (k,) int8, PROV_SAMPLE / PROV_STEINER
    sample_ids: np.ndarray    # (k,) int64, -1 when Steiner

    @property
    def n_facets(self) -> int:
        return len(self.upper_seeds)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def loop(self, i: int) -> np.ndarray:
        return self.flat_loops[self.loop_offsets[i]:self.loop_offsets[i + 1]]

    def loops(self):
        for i in range(self.n_facets):
            yield self.loop(i)

    @property
    def facets(self) -> list[SurfaceFacet]:
        return [
            SurfaceFacet(
                loop=self.loop(i).copy(),
                upper_seed_id=int(self.upper_seeds[i]),
                lower_seed_id=int(self.lower_seeds[i]),
            )
            for i in range(self.n_facets)
        ]

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (e, 2) array of vertex ids."""
        if self.n_facets == 0:
            return np.empty((0, 2), dtype=np.int64)
        a = self.flat_loops
        b = np.empty_like(a)
        for i in range(self.n_facets):
            lo, hi = self.loop_offsets[i], self.loop_offsets[i + 1]
            b[lo:hi - 1] = a[lo + 1:hi]
            b[hi - 1] = a[lo]
        e = np.sort(np.stack([a, b], axis=1), axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self) -> int:
        """V - E + F over referenced vertices (2 for a sphere, 0 for a torus)."""
        if self.n_facets == 0:
            return 0
        v = len(np.unique(self.flat_loops))
        return v - len(self.edges()) + self.n_facets


def _empty_surface() -> ReconSurface:
    return ReconSurface(
        vertices=np.empty((0, 3)),
        flat_loops=np.empty(0, dtype=np.int64),
        loop_offsets=np.zeros(1, dtype=np.int64),
        upper_seeds=np.empty(0, dtype=np.int64),
        lower_seeds=np.empty(0, dtype=np.int64),
        provenance=np.empty(0, dtype=np.int8),
        sample_ids=np.empty(0, dtype=np.int64),
    )


def _weld(points: np.ndarray, radius: float):
    """Merge points within `radius` into components; return (pool, index map).

    Component representative = smallest original index, so the pool order is
    the deterministic first-occurrence order.
    """
    n = len(points)
    lab = np.arange(n)
    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    while len(pairs):
        before = lab.copy()
        np.minimum.at(lab, pairs[:, 0], lab[pairs[:, 1]])
        np.minimum.at(lab, pairs[:, 1], lab[pairs[:, 0]])
        lab = lab[lab]  # pointer jumping keeps chains shallow
        if np.array_equal(lab, before):
            break
    reps, inv = np.unique(lab, return_inverse=True)
    return points[reps], inv


def extract_surface(
    mesh: VoronoiMesh,
    samples: SampleSet | None = None,
    tol: Tolerance = TOL,
) -> ReconSurface:
    """Collect every Upper|Lower separating face into one welded surface.

    Each facet is read from its Lower cell (outward orientation points toward
    the Upper cell), vertices are welded across cells, and each pool vertex is
    tagged with its provenance against the input samples when given.
    """
    kinds = mesh.seeds.kinds
    lower_ids = np.flatnonzero(kinds == KIND_LOWER)
    blocks: list[np.ndarray] = []
    lens: list[int] = []
    uppers: list[int] = []
    lowers: list[int] = []
    for li in lower_ids:
        cell = mesh.cells[li]
        for fi in range(cell.n_faces):
            nb = int(cell.face_neighbors[fi])
            if nb >= 0 and kinds[nb] == KIND_UPPER:
                lo = cell.loop(fi)
                blocks.append(cell.vertices[lo])
                lens.append(len(lo))
                uppers.append(nb)
                lowers.append(int(li))
    if not blocks:
        return _empty_surface()

    stacked = np.concatenate(blocks)
    diag = float(np.linalg.norm(mesh.clip_box[1] - mesh.clip_box[0]))
    pool, inv = _weld(stacked, 4.0 * tol.band(diag))

    lens_arr = np.array(lens, dtype=np.int64)
    offsets = np.zeros(len(lens_arr) + 1, dtype=np.int64)
    np.cumsum(lens_arr, out=offsets[1:])
    flat = inv.astype(np.int64)

    # welding can in principle fuse adjacent loop vertices; drop exact repeats
    cleaned: list[np.ndarray] = []
    new_lens: list[int] = []
    keep_facet: list[bool] = []
    for i in range(len(lens_arr)):
        lo = flat[offsets[i]:offsets[i + 1]]
        keep = lo != np.roll(lo, 1)
        lo = lo[keep] if not keep.all() else lo
        ok = len(lo) >= 3
        keep_facet.append(ok)
        if ok:
            cleaned.append(lo)
            new_lens.append(len(lo))

    flat = np.concatenate(cleaned)
    loop_offsets = np.zeros(len(cleaned) + 1, dtype=np.int64)
    np.cumsum(np.array(new_lens, dtype=np.int64), out=loop_offsets[1:])
    keep_mask = np.array(keep_facet)
    upper_arr = np.array(uppers, dtype=np.int64)[keep_mask]
    lower_arr = np.array(lowers, dtype=np.int64)[keep_mask]

    if samples is not None and len(samples):
        d, si = cKDTree(samples.positions).query(pool, workers=1)
        match = d <= SAMPLE_MATCH_REL * samples.lfs[si]
        provenance = np.where(match, PROV_SAMPLE, PROV_STEINER).astype(np.int8)
        sample_ids = np.where(match, si, -1).astype(np.int64)
    else:
        provenance = np.full(len(pool), PROV_STEINER, dtype=np.int8)
        sample_ids = np.full(len(pool), -1, dtype=np.int64)

    return ReconSurface(
        vertices=pool,
        flat_loops=flat,
        loop_offsets=loop_offsets,
        upper_seeds=upper_arr,
        lower_seeds=lower_arr,
        provenance=provenance,
        sample_ids=sample_ids,
    )
