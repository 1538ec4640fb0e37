"""Union of surface balls: neighbor index, guide pairs, surface seeds, disk caps.

Each sample p_i carries a ball B_i of radius delta*lfs(p_i). Boundary corners
of U = union(B_i) are the intersection points of sphere triples that no other
ball strictly contains; the uncovered corners become the surface seeds (upper
side outside the surface, lower side inside). A pair with exactly one covered
corner marks a sliver configuration and is reported.

Tolerance convention: a corner grazing another sphere within the tolerance
band counts as uncovered, which also makes the three defining spheres of a
corner exclude themselves from its coverage test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import SideAmbiguous
from .geom import TOL, Tolerance, tri_sphere_intersect_batch
from .sampling import SampleSet
from .seeds import KIND_LOWER, KIND_UPPER, SeedSet
from .surfaces import Surface

__all__ = [
    "BallIndex",
    "GuidePair",
    "build_ball_index",
    "enumerate_guides",
    "classify_coverage",
    "place_surface_seeds",
    "build_surface_seeds",
    "verify_disk_caps",
    "seeds_on_ball",
]


# ---------------------------------------------------------------------------
# neighbor index


@dataclass
class BallIndex:
    positions: np.ndarray   # (n, 3) ball centers (the samples)
    radii: np.ndarray       # (n,) delta * lfs
    lfs: np.ndarray         # (n,)
    normals: np.ndarray     # (n, 3) outward surface normals at the samples
    cell_size: float
    grid: dict              # integer cell -> np.ndarray of ball indices
    neighbors: list         # per ball, sorted array of j with B_i and B_j overlapping

    def __len__(self):
        return len(self.positions)


def build_ball_index(samples: SampleSet) -> BallIndex:
    """Uniform spatial hash with cell size = max ball diameter, then exact
    pairwise overlap tests against the 27-cell stencil."""
    pos = samples.positions
    radii = samples.radius
    n = len(pos)
    cell = 2.0 * float(radii.max()) if n else 1.0
    keys = np.floor(pos / cell).astype(np.int64)
    grid: dict = {}
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    sk = keys[order]
    cuts = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
    for blk in np.split(order, cuts):
        grid[tuple(keys[blk[0]])] = blk

    neighbors: list = [None] * n
    offsets = np.array(
        [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)]
    )
    for ck, members in grid.items():
        stencil = [grid.get((ck[0] + o[0], ck[1] + o[1], ck[2] + o[2])) for o in offsets]
        cand = np.concatenate([s for s in stencil if s is not None])
        D = np.linalg.norm(pos[members][:, None, :] - pos[cand][None, :, :], axis=2)
        close = D < radii[members][:, None] + radii[cand][None, :]
        for row, i in enumerate(members):
            nb = cand[close[row]]
            neighbors[i] = np.sort(nb[nb != i])
    return BallIndex(
        positions=pos,
        radii=radii,
        lfs=samples.lfs,
        normals=samples.normals,
        cell_size=cell,
        grid=grid,
        neighbors=neighbors,
    )


# ---------------------------------------------------------------------------
# guide pairs


@dataclass
class GuidePair:
    triple: tuple            # sorted (i, j, k)
    upper: np.ndarray        # corner on the outside of M (or larger offset)
    lower: np.ndarray        # corner on the inside of M
    straddles: bool          # True when the two corners sit on opposite sides
    upper_side: int = 1      # +1 outside / -1 inside, per corner
    lower_side: int = -1
    upper_covered: bool = False
    lower_covered: bool = False
    upper_witness: int = -1
    lower_witness: int = -1


def _edge_keys(idx: BallIndex) -> np.ndarray:
    n = len(idx)
    keys = []
    for i, nb in enumerate(idx.neighbors):
        up = nb[nb > i]
        if len(up):
            keys.append(i * n + up)
    if not keys:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(keys))


def _triples_for_block(idx: BallIndex, edge_keys: np.ndarray, i_lo: int, i_hi: int):
    """All mutually-neighboring sorted triples with first index in [i_lo, i_hi)."""
    n = len(idx)
    cols_i, cols_j, cols_k = [], [], []
    for i in range(i_lo, i_hi):
        up = idx.neighbors[i]
        up = up[up > i]
        m = len(up)
        if m < 2:
            continue
        jj, kk = np.triu_indices(m, k=1)
        cols_i.append(np.full(jj.shape, i, dtype=np.int64))
        cols_j.append(up[jj])
        cols_k.append(up[kk])
    if not cols_i:
        return np.empty((0, 3), dtype=np.int64)
    I = np.concatenate(cols_i)
    J = np.concatenate(cols_j)
    K = np.concatenate(cols_k)
    want = J * n + K
    pos = np.searchsorted(edge_keys, want)
    ok = (pos < len(edge_keys)) & (edge_keys[np.minimum(pos, len(edge_keys) - 1)] == want)
    return np.column_stack([I[ok], J[ok], K[ok]])


def _block_ranges(idx: BallIndex, pair_budget: int = 2_000_000):
    """Split ball indices into blocks with a bounded candidate-pair count."""
    counts = np.array(
        [len(nb[nb > i]) * (len(nb[nb > i]) - 1) // 2 for i, nb in enumerate(idx.neighbors)],
        dtype=np.int64,
    )
    blocks = []
    start, acc = 0, 0
    for i, c in enumerate(counts):
        acc += int(c)
        if acc >= pair_budget:
            blocks.append((start, i + 1))
            start, acc = i + 1, 0
    if start < len(idx):
        blocks.append((start, len(idx)))
    return blocks


def _intersect_triples(idx: BallIndex, T: np.ndarray, tol: Tolerance):
    """Trilaterate sphere triples; returns surviving triples and corner pairs."""
    P = idx.positions
    R = idx.radii
    pp, pm, valid = tri_sphere_intersect_batch(
        P[T[:, 0]], P[T[:, 1]], P[T[:, 2]], R[T[:, 0]], R[T[:, 1]], R[T[:, 2]], tol
    )
    return T[valid], pp[valid], pm[valid]


def _side_pairs(surface: Surface, pp: np.ndarray, pm: np.ndarray, tol: Tolerance):
    """Classify both corners of each pair; order each pair as (upper, lower)."""
    sp = surface.signed_side_batch(pp, tol)
    sm = surface.signed_side_batch(pm, tol)
    on = np.flatnonzero((sp == 0) | (sm == 0))
    if on.size:
        raise SideAmbiguous(
            f"{on.size} guide corner(s) classify On the surface; first at "
            f"{pp[on[0]] if sp[on[0]] == 0 else pm[on[0]]}"
        )
    straddles = sp != sm
    # put the outside corner in the upper slot wherever the pair straddles
    swap = straddles & (sp < sm)
    upper = np.where(swap[:, None], pm, pp)
    lower = np.where(swap[:, None], pp, pm)
    upper_side = np.where(swap, sm, sp).astype(np.int8)
    lower_side = np.where(swap, sp, sm).astype(np.int8)
    return upper, lower, straddles, upper_side, lower_side


def _coverage_for_group(idx: BallIndex, i: int, pts: np.ndarray, tol: Tolerance):
    """Covered flag + smallest-index witness for corner points of triples whose
    first index is i. Candidate coverers are N(i); the band makes the three
    defining spheres exclude themselves."""
    nb = idx.neighbors[i]
    if len(nb) == 0 or len(pts) == 0:
        return np.zeros(len(pts), dtype=bool), np.full(len(pts), -1, dtype=np.int64)
    C = idx.positions[nb]
    R = idx.radii[nb]
    band = tol.band(float(R.max()))
    D = np.linalg.norm(pts[:, None, :] - C[None, :, :], axis=2)
    inside = D < (R[None, :] - band)
    covered = inside.any(axis=1)
    witness = np.full(len(pts), -1, dtype=np.int64)
    if covered.any():
        witness[covered] = nb[np.argmax(inside[covered], axis=1)]
    return covered, witness


def enumerate_guides(idx: BallIndex, surface: Surface, tol: Tolerance = TOL):
    """Materialize one GuidePair per intersecting mutually-neighboring triple."""
    edge_keys = _edge_keys(idx)
    out = []
    for lo, hi in _block_ranges(idx):
        T = _triples_for_block(idx, edge_keys, lo, hi)
        if len(T) == 0:
            continue
        T, pp, pm = _intersect_triples(idx, T, tol)
        if len(T) == 0:
            continue
        upper, lower, straddles, u_side, l_side = _side_pairs(surface, pp, pm, tol)
        for r in range(len(T)):
            out.append(
                GuidePair(
                    triple=tuple(int(v) for v in T[r]),
                    upper=upper[r],
                    lower=lower[r],
                    straddles=bool(straddles[r]),
                    upper_side=int(u_side[r]),
                    lower_side=int(l_side[r]),
                )
            )
    return out


def classify_coverage(guides, idx: BallIndex, tol: Tolerance = TOL):
    """Fill covered flags and witnesses on a list of GuidePairs (in place)."""
    if not guides:
        return guides
    order = np.argsort([g.triple[0] for g in guides], kind="stable")
    by_i: dict = {}
    for gi in order:
        by_i.setdefault(guides[gi].triple[0], []).append(gi)
    for i, rows in by_i.items():
        pts = np.array([guides[r].upper for r in rows] + [guides[r].lower for r in rows])
        covered, witness = _coverage_for_group(idx, i, pts, tol)
        m = len(rows)
        for a, r in enumerate(rows):
            guides[r].upper_covered = bool(covered[a])
            guides[r].upper_witness = int(witness[a])
            guides[r].lower_covered = bool(covered[m + a])
            guides[r].lower_witness = int(witness[m + a])
    return guides


def _dedup_and_order(positions, kinds, origins, scale, tol: Tolerance):
    """Merge numerically coincident seeds (keep the lexicographically smallest
    triple), then order by (kind, triple)."""
    m = len(positions)
    if m == 0:
        return SeedSet(
            np.empty((0, 3)), np.empty(0, dtype=np.int8), np.empty((0, 3), dtype=np.int64)
        )
    merge_r = 4.0 * tol.band(scale)
    pairs = cKDTree(positions).query_pairs(merge_r, output_type="ndarray")
    parent = np.arange(m)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(m)])
    keep = []
    for root in np.unique(roots):
        members = np.flatnonzero(roots == root)
        best = members[np.lexsort((origins[members, 2], origins[members, 1], origins[members, 0]))][0]
        keep.append(best)
    keep = np.array(keep)
    positions, kinds, origins = positions[keep], kinds[keep], origins[keep]
    final = np.lexsort((origins[:, 2], origins[:, 1], origins[:, 0], kinds))
    return SeedSet(positions[final], kinds[final], origins[final])


def place_surface_seeds(guides, scale: float = 1.0, tol: Tolerance = TOL):
    """Uncovered corners -> seeds; half-covered pairs -> sliver report."""
    pos, kinds, origins = [], [], []
    sliver = []
    same_side_uncovered = 0
    for g in guides:
        emitted = 0
        for corner, covered, side in (
            (g.upper, g.upper_covered, g.upper_side),
            (g.lower, g.lower_covered, g.lower_side),
        ):
            if covered:
                continue
            emitted += 1
            pos.append(corner)
            kinds.append(KIND_UPPER if side > 0 else KIND_LOWER)
            origins.append(g.triple)
        if g.upper_covered != g.lower_covered:
            sliver.append(
                {
                    "triple": g.triple,
                    "covered_side": "upper" if g.upper_covered else "lower",
                    "witness": g.upper_witness if g.upper_covered else g.lower_witness,
                }
            )
        if emitted == 2 and not g.straddles:
            same_side_uncovered += 1
    seed_set = _dedup_and_order(
        np.array(pos) if pos else np.empty((0, 3)),
        np.array(kinds, dtype=np.int8) if kinds else np.empty(0, dtype=np.int8),
        np.array(origins, dtype=np.int64) if origins else np.empty((0, 3), dtype=np.int64),
        scale,
        tol,
    )
    stats = {
        "pairs": len(guides),
        "half_covered": len(sliver),
        "same_side_uncovered": same_side_uncovered,
    }
    return seed_set, sliver, stats


def build_surface_seeds(idx: BallIndex, surface: Surface, tol: Tolerance = TOL):
    """Chunked full pipeline: triples -> corners -> coverage -> seeds.

    Equivalent to enumerate_guides + classify_coverage + place_surface_seeds
    but never materializes per-pair objects; covered pairs are dropped as soon
    as each chunk is classified.
    """
    edge_keys = _edge_keys(idx)
    pos_parts, kind_parts, origin_parts = [], [], []
    sliver = []
    stats = {
        "triples_candidate": 0,
        "pairs": 0,
        "both_covered": 0,
        "half_covered": 0,
        "both_uncovered": 0,
        "same_side_uncovered": 0,
    }
    for lo, hi in _block_ranges(idx):
        T = _triples_for_block(idx, edge_keys, lo, hi)
        stats["triples_candidate"] += len(T)
        if len(T) == 0:
            continue
        T, pp, pm = _intersect_triples(idx, T, tol)
        if len(T) == 0:
            continue
        stats["pairs"] += len(T)
        upper, lower, straddles, u_side, l_side = _side_pairs(surface, pp, pm, tol)
        cov_u = np.zeros(len(T), dtype=bool)
        cov_l = np.zeros(len(T), dtype=bool)
        wit_u = np.full(len(T), -1, dtype=np.int64)
        wit_l = np.full(len(T), -1, dtype=np.int64)
        firsts = T[:, 0]
        starts = np.flatnonzero(np.r_[True, np.diff(firsts) != 0])
        ends = np.r_[starts[1:], len(T)]
        for s, e in zip(starts, ends):
            pts = np.concatenate([upper[s:e], lower[s:e]])
            covered, witness = _coverage_for_group(idx, int(firsts[s]), pts, tol)
            m = e - s
            cov_u[s:e], wit_u[s:e] = covered[:m], witness[:m]
            cov_l[s:e], wit_l[s:e] = covered[m:], witness[m:]

        both_cov = cov_u & cov_l
        half = cov_u ^ cov_l
        none_cov = ~(cov_u | cov_l)
        stats["both_covered"] += int(both_cov.sum())
        stats["half_covered"] += int(half.sum())
        stats["both_uncovered"] += int(none_cov.sum())
        stats["same_side_uncovered"] += int((none_cov & ~straddles).sum())
        for r in np.flatnonzero(half):
            up_side = bool(cov_u[r])
            sliver.append(
                {
                    "triple": tuple(int(v) for v in T[r]),
                    "covered_side": "upper" if up_side else "lower",
                    "witness": int(wit_u[r] if up_side else wit_l[r]),
                }
            )
        emit_u = ~cov_u
        emit_l = ~cov_l
        if emit_u.any():
            pos_parts.append(upper[emit_u])
            kind_parts.append(
                np.where(u_side[emit_u] > 0, KIND_UPPER, KIND_LOWER).astype(np.int8)
            )
            origin_parts.append(T[emit_u])
        if emit_l.any():
            pos_parts.append(lower[emit_l])
            kind_parts.append(
                np.where(l_side[emit_l] > 0, KIND_UPPER, KIND_LOWER).astype(np.int8)
            )
            origin_parts.append(T[emit_l])

    scale = float(idx.lfs.max()) if len(idx) else 1.0
    seed_set = _dedup_and_order(
        np.concatenate(pos_parts) if pos_parts else np.empty((0, 3)),
        np.concatenate(kind_parts) if kind_parts else np.empty(0, dtype=np.int8),
        np.concatenate(origin_parts) if origin_parts else np.empty((0, 3), dtype=np.int64),
        scale,
        tol,
    )
    return seed_set, sliver, stats


# ---------------------------------------------------------------------------
# disk-caps verification


def _perp_basis(a):
    h = np.argmin(np.abs(a))
    axis = np.zeros(3)
    axis[h] = 1.0
    e1 = np.cross(a, axis)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(a, e1)


def _uncovered_arcs(intervals):
    """Complement of a union of angular intervals (lo, hi) on [0, 2pi)."""
    two_pi = 2.0 * np.pi
    if not intervals:
        return [(0.0, two_pi)], True  # full circle uncovered
    evs = []
    for lo, hi in intervals:
        lo, hi = lo % two_pi, hi % two_pi
        if hi < lo:
            evs.append((lo, two_pi))
            evs.append((0.0, hi))
        else:
            evs.append((lo, hi))
    evs.sort()
    merged = [list(evs[0])]
    for lo, hi in evs[1:]:
        if lo <= merged[-1][1] + 1e-12:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    # wrap-around merge
    if len(merged) > 1 and merged[0][0] <= 1e-12 and merged[-1][1] >= two_pi - 1e-12:
        merged[0][0] = merged[-1][0] - two_pi
        merged.pop()
    arcs = []
    for a, b in zip(merged, merged[1:] + [(merged[0][0] + two_pi, None)]):
        if b[0] - a[1] > 1e-9:
            arcs.append((a[1], b[0]))
    return arcs, False


def _ball_cap_report(idx: BallIndex, i: int, surface: Surface, tol: Tolerance):
    nb = idx.neighbors[i]
    c_i = idx.positions[i]
    r_i = idx.radii[i]
    n_i = idx.normals[i]
    band = tol.band(float(r_i))

    poles = np.array([c_i + r_i * n_i, c_i - r_i * n_i])
    pole_ok = True
    if len(nb):
        D = np.linalg.norm(poles[:, None, :] - idx.positions[nb][None], axis=2)
        pole_ok = bool(np.all(D >= idx.radii[nb][None, :] - band))

    if len(nb) == 0:
        return {"ok": True, "pole_ok": pole_ok, "cycles": 0, "sides": (), "vacuous": True}

    vec = idx.positions[nb] - c_i
    d = np.linalg.norm(vec, axis=1)
    a = vec / d[:, None]
    g = (r_i**2 + d**2 - idx.radii[nb] ** 2) / (2.0 * r_i * d)
    if np.any(g <= -1.0 + 1e-12):
        # some neighbor swallows this sphere entirely
        return {"ok": False, "pole_ok": pole_ok, "cycles": 0, "sides": (), "vacuous": False}
    active = g < 1.0 - 1e-12
    act = np.flatnonzero(active)
    if act.size == 0:
        # neighbors exist but no cap touches the sphere: single uncovered sphere
        return {"ok": False, "pole_ok": pole_ok, "cycles": 1, "sides": ("both",), "vacuous": False}

    s = np.sqrt(np.maximum(0.0, 1.0 - g[act] ** 2))
    arcs = []          # (circle row, theta_lo, theta_hi)
    endpoints = []     # (3D point, arc id, which end)
    full_circles = []
    for row, l in enumerate(act):
        e1, e2 = _perp_basis(a[l])
        A = s[row] * (e1 @ a[act].T)
        B = s[row] * (e2 @ a[act].T)
        gamma = g[act] - g[l] * (a[l] @ a[act].T)
        Rm = np.hypot(A, B)
        intervals = []
        fully_covered = False
        for m in range(len(act)):
            if m == row:
                continue
            if Rm[m] <= abs(gamma[m]) + 1e-14:
                if gamma[m] < 0:
                    fully_covered = True
                    break
                continue  # grazing or no coverage of this circle
            w = np.arccos(np.clip(gamma[m] / Rm[m], -1.0, 1.0))
            phi = np.arctan2(B[m], A[m])
            intervals.append((phi - w, phi + w))
        if fully_covered:
            continue
        unc, full = _uncovered_arcs(intervals)
        if full:
            full_circles.append(row)
            continue
        for lo, hi in unc:
            arcs.append((row, lo, hi))

    def circle_point(row, theta):
        l = act[row]
        e1, e2 = _perp_basis(a[l])
        u = g[l] * a[l] + s[row] * (np.cos(theta) * e1 + np.sin(theta) * e2)
        return c_i + r_i * u

    # stitch arc endpoints into cycles
    n_arcs = len(arcs)
    pts = []
    for aid, (row, lo, hi) in enumerate(arcs):
        pts.append(circle_point(row, lo))
        pts.append(circle_point(row, hi))
    cycles = len(full_circles)
    sides = []
    degree_ok = True
    if n_arcs:
        pts = np.array(pts)
        tree = cKDTree(pts)
        pairs = tree.query_pairs(10.0 * band + 1e-9 * r_i, output_type="ndarray")
        parent = list(range(2 * n_arcs))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        deg = np.zeros(2 * n_arcs, dtype=int)
        for x, y in pairs:
            deg[x] += 1
            deg[y] += 1
            rx, ry = find(int(x)), find(int(y))
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)
        degree_ok = bool(np.all(deg == 1))
        for aid in range(n_arcs):  # arc connects its two endpoints
            rx, ry = find(2 * aid), find(2 * aid + 1)
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)
        comps = {find(x) for x in range(2 * n_arcs)}
        cycles += len(comps)

    # classify each arc's adjacent uncovered region by side of M
    def arc_side(row, lo, hi):
        l = act[row]
        theta = 0.5 * (lo + hi)
        e1, e2 = _perp_basis(a[l])
        u = g[l] * a[l] + s[row] * (np.cos(theta) * e1 + np.sin(theta) * e2)
        u = u - 1e-3 * a[l]
        u /= np.linalg.norm(u)
        return int(surface.signed_side_batch((c_i + r_i * u)[None, :], tol)[0])

    comp_sides: dict = {}
    if n_arcs:
        for aid, (row, lo, hi) in enumerate(arcs):
            comp_sides.setdefault(find(2 * aid), set()).add(arc_side(row, lo, hi))
    for row in full_circles:
        # a full uncovered circle bounds its own region; classify like an arc
        comp_sides[f"full{row}"] = {arc_side(row, 0.0, 2.0 * np.pi)}

    sides = [tuple(sorted(v)) for v in comp_sides.values()]
    clean = all(len(v) == 1 and v[0] != 0 for v in sides)
    one_per_side = sorted(x for v in sides for x in v) == [-1, 1]
    ok = bool(pole_ok and degree_ok and clean and cycles == 2 and one_per_side)
    return {
        "ok": ok,
        "pole_ok": pole_ok,
        "cycles": cycles,
        "sides": tuple(sides),
        "vacuous": False,
    }


def verify_disk_caps(idx: BallIndex, surface: Surface, tol: Tolerance = TOL):
    """Per-ball disk-caps check: poles uncovered + exactly one uncovered-region
    boundary cycle per side of the surface."""
    reports = [_ball_cap_report(idx, i, surface, tol) for i in range(len(idx))]
    n_ok = sum(r["ok"] for r in reports)
    return {
        "ok": n_ok == len(reports),
        "fraction_ok": n_ok / len(reports) if reports else 1.0,
        "per_ball": reports,
    }


def seeds_on_ball(idx: BallIndex, i: int, seed_positions: np.ndarray, tol: Tolerance = TOL):
    """Indices of seeds lying on sphere i within tolerance."""
    c_i, r_i = idx.positions[i], idx.radii[i]
    band = tol.band(float(r_i)) * 10.0
    d = np.linalg.norm(seed_positions - c_i, axis=1)
    return np.flatnonzero(np.abs(d - r_i) <= band)
