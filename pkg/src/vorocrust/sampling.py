"""Surface sampling: sparse epsilon-covers of a smooth closed surface.

Generates a sample set P on the surface M such that
  * covering: every x in M has a sample within eps*lfs(x), and
  * sparsity: every pair satisfies d(p_i, p_j) >= sigma*eps*min(lfs_i, lfs_j),

by Poisson-disk dart throwing followed by gap-fill at uncovered probe points.
Gap-fill preserves sparsity automatically: any point farther than eps*lfs from
all samples is also farther than sigma*eps*min(lfs, .) for sigma <= 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import BudgetExceeded
from .surfaces import Surface

__all__ = ["SampleSet", "generate_sample", "verify_covering", "verify_sparsity"]

MIN_PROBES = 100_000
PROBES_PER_SAMPLE = 10


@dataclass
class SampleSet:
    """Struct-of-arrays sample set; `radius` derives as delta*lfs per point."""

    positions: np.ndarray  # (n, 3)
    normals: np.ndarray    # (n, 3)
    lfs: np.ndarray        # (n,)
    eps: float
    sigma: float
    delta: float
    rng_seed: int

    def __post_init__(self):
        n = len(self.positions)
        if self.normals.shape != (n, 3) or self.lfs.shape != (n,):
            raise ValueError("inconsistent sample array shapes")
        if not (self.eps > 0 and self.sigma > 0 and self.delta > 0):
            raise ValueError("eps, sigma, delta must be positive")

    def __len__(self):
        return len(self.positions)

    @property
    def radius(self):
        return self.delta * self.lfs


def _probe_cache(surface: Surface, cache: dict, n: int):
    if n not in cache:
        pts = surface.probe_points(n)
        cache[n] = (pts, surface.lfs_at(pts))
    return cache[n]


def _exact_conflict(d, lfs_new, lfs_old, limit_factor):
    """True where d < limit_factor * min(lfs_new, lfs_old)."""
    return d < limit_factor * np.minimum(lfs_new, lfs_old)


def generate_sample(
    surface: Surface,
    eps: float,
    sigma: float = 0.75,
    rng_seed: int = 0,
    delta: float | None = None,
    max_samples: int = 1_000_000,
) -> SampleSet:
    """Dart-throw then gap-fill until the covering and sparsity checks pass."""
    if not 0.0 < eps <= 0.1:
        raise ValueError(f"eps={eps} outside supported range (0, 0.1]")
    if not 0.5 <= sigma <= 1.0:
        raise ValueError(f"sigma={sigma} outside supported range [0.5, 1]")
    if delta is None:
        delta = 2.0 * eps
    rng = np.random.default_rng(rng_seed)
    limit = sigma * eps

    pts: list[np.ndarray] = []
    lfs: list[np.ndarray] = []

    def mutual_keep(cand, cand_lfs):
        """Greedy index-order dedup of one batch via its conflict pairs."""
        k = len(cand)
        if k < 2:
            return np.arange(k)
        pairs = cKDTree(cand).query_pairs(limit * float(cand_lfs.max()), output_type="ndarray")
        if len(pairs) == 0:
            return np.arange(k)
        d = np.linalg.norm(cand[pairs[:, 0]] - cand[pairs[:, 1]], axis=1)
        real = d < limit * np.minimum(cand_lfs[pairs[:, 0]], cand_lfs[pairs[:, 1]])
        adj: dict[int, list[int]] = {}
        for i, j in pairs[real]:
            lo, hi = (int(i), int(j)) if i < j else (int(j), int(i))
            adj.setdefault(hi, []).append(lo)
        kept = np.ones(k, dtype=bool)
        for j in range(k):
            for i in adj.get(j, ()):
                if kept[i]:
                    kept[j] = False
                    break
        return np.flatnonzero(kept)

    # -- dart throwing -------------------------------------------------------
    batch = 8192
    stale = 0
    while stale < 2:
        cand = surface.random_points(rng, batch)
        cand_lfs = surface.lfs_at(cand)
        if pts:
            cur = np.concatenate(pts)
            cur_lfs = np.concatenate(lfs)
            tree = cKDTree(cur)
            r_query = limit * max(float(cur_lfs.max()), float(cand_lfs.max()))
            neigh = tree.query_ball_point(cand, r_query, return_sorted=False)
            free = np.fromiter(
                (
                    not np.any(
                        _exact_conflict(
                            np.linalg.norm(cur[idx] - cand[i], axis=1),
                            cand_lfs[i],
                            cur_lfs[idx],
                            limit,
                        )
                    )
                    if idx
                    else True
                    for i, idx in enumerate(neigh)
                ),
                dtype=bool,
                count=len(cand),
            )
            cand, cand_lfs = cand[free], cand_lfs[free]
        if len(cand):
            keep = mutual_keep(cand, cand_lfs)
            cand, cand_lfs = cand[keep], cand_lfs[keep]
        if len(cand) < 0.005 * batch:
            stale += 1
        else:
            stale = 0
        if len(cand):
            pts.append(cand)
            lfs.append(cand_lfs)
            if sum(len(p) for p in pts) > max_samples:
                raise BudgetExceeded(f"sample count exceeded {max_samples}")

    # -- gap fill to covering --------------------------------------------------
    cache: dict = {}
    for _round in range(200):
        cur = np.concatenate(pts)
        cur_lfs = np.concatenate(lfs)
        n_probes = max(PROBES_PER_SAMPLE * len(cur), MIN_PROBES)
        probes, probe_lfs = _probe_cache(surface, cache, n_probes)
        d, _ = cKDTree(cur).query(probes, workers=1)
        ratio = d / (eps * probe_lfs)
        bad = np.flatnonzero(ratio > 1.0)
        if bad.size == 0:
            break
        order = bad[np.argsort(-ratio[bad])]  # worst gaps first
        keep = mutual_keep(probes[order], probe_lfs[order])
        pts.append(probes[order][keep])
        lfs.append(probe_lfs[order][keep])
        if sum(len(p) for p in pts) > max_samples:
            raise BudgetExceeded(f"sample count exceeded {max_samples}")
    else:
        raise RuntimeError("gap fill did not converge in 200 rounds")

    positions = np.concatenate(pts)
    s = SampleSet(
        positions=positions,
        normals=surface.normal_at(positions),
        lfs=np.concatenate(lfs),
        eps=eps,
        sigma=sigma,
        delta=delta,
        rng_seed=rng_seed,
    )
    cov = verify_covering(s, surface)
    spa = verify_sparsity(s)
    if not (cov["ok"] and spa["ok"]):
        raise RuntimeError(
            f"self-check failed: covering={cov['worst_ratio']:.6f}, "
            f"sparsity violations={len(spa['violations'])}"
        )
    return s


def verify_covering(samples: SampleSet, surface: Surface, probe_count: int | None = None):
    """Check d(x, P) <= eps*lfs(x) at quasi-uniform probe points."""
    if probe_count is None:
        probe_count = max(PROBES_PER_SAMPLE * len(samples), MIN_PROBES)
    if probe_count < PROBES_PER_SAMPLE * len(samples):
        raise ValueError("probe_count must be at least 10x the sample count")
    probes = surface.probe_points(probe_count)
    probe_lfs = surface.lfs_at(probes)
    d, _ = cKDTree(samples.positions).query(probes, workers=1)
    ratio = d / (samples.eps * probe_lfs)
    worst = int(np.argmax(ratio))
    return {
        "ok": bool(ratio[worst] <= 1.0),
        "worst_ratio": float(ratio[worst]),
        "worst_point": probes[worst].copy(),
    }


def verify_sparsity(samples: SampleSet):
    """Exhaustive pairwise check of d >= sigma*eps*min(lfs_i, lfs_j)."""
    limit = samples.sigma * samples.eps
    n = len(samples)
    if n < 2:
        return {"ok": True, "violations": []}
    tree = cKDTree(samples.positions)
    pairs = tree.query_pairs(limit * float(samples.lfs.max()), output_type="ndarray")
    violations = []
    if len(pairs):
        P = samples.positions
        d = np.linalg.norm(P[pairs[:, 0]] - P[pairs[:, 1]], axis=1)
        m = np.minimum(samples.lfs[pairs[:, 0]], samples.lfs[pairs[:, 1]])
        bad = d < limit * m * (1.0 - 1e-12)
        violations = [tuple(int(v) for v in p) for p in pairs[bad]]
    return {"ok": not violations, "violations": violations}
