"""Conforming Voronoi meshing of smooth closed surfaces.

The pipeline samples a closed surface, grows a union of surface balls, places
Voronoi seeds at the uncovered corners of the union boundary (plus graded
interior seeds from an octree), and extracts a watertight reconstruction with
verified quality/approximation bounds.
"""

from . import bounds, geom, mesher, surfaces
from .errors import VorocrustError

__version__ = "0.1.0"

__all__ = ["geom", "surfaces", "bounds", "mesher", "VorocrustError", "__version__"]
