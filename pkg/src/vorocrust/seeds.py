"""Seed sets: Voronoi sites with a kind tag and their provenance.

Surface seeds carry the sorted index triple of the sample balls whose boundary
corner they are; interior seeds carry their octree box id in the first origin
slot with the remaining slots set to -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_UPPER = 0
KIND_LOWER = 1
KIND_INTERIOR = 2
KIND_CHARS = {KIND_UPPER: "U", KIND_LOWER: "L", KIND_INTERIOR: "I"}
CHAR_KINDS = {v: k for k, v in KIND_CHARS.items()}

__all__ = [
    "KIND_UPPER",
    "KIND_LOWER",
    "KIND_INTERIOR",
    "KIND_CHARS",
    "CHAR_KINDS",
    "SeedSet",
]


@dataclass
class SeedSet:
    """Struct-of-arrays seed collection; the row index is the seed id."""

    positions: np.ndarray  # (m, 3) float
    kinds: np.ndarray      # (m,) int8, KIND_* constants
    origins: np.ndarray    # (m, 3) int64; triple (i,j,k) or (box_id, -1, -1)

    def __post_init__(self):
        m = len(self.positions)
        if self.kinds.shape != (m,) or self.origins.shape != (m, 3):
            raise ValueError("inconsistent seed array shapes")

    def __len__(self):
        return len(self.positions)

    def select(self, mask):
        return SeedSet(self.positions[mask], self.kinds[mask], self.origins[mask])

    @property
    def upper(self):
        return self.select(self.kinds == KIND_UPPER)

    @property
    def lower(self):
        return self.select(self.kinds == KIND_LOWER)

    @property
    def interior(self):
        return self.select(self.kinds == KIND_INTERIOR)

    @staticmethod
    def concat(parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return SeedSet(
                np.empty((0, 3)), np.empty(0, dtype=np.int8), np.empty((0, 3), dtype=np.int64)
            )
        return SeedSet(
            np.concatenate([p.positions for p in parts]),
            np.concatenate([p.kinds for p in parts]),
            np.concatenate([p.origins for p in parts]),
        )
