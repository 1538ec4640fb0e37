"""Exception types raised across the pipeline."""


class VorocrustError(Exception):
    """Base class for all pipeline errors."""


class DegenerateCenters(VorocrustError):
    """Sphere centers are coincident or collinear."""


class NoIntersection(VorocrustError):
    """Three spheres do not intersect in two points (includes tangency)."""


class DegenerateTriangle(VorocrustError):
    """Triangle vertices are collinear or coincident."""


class AmbiguousProjection(VorocrustError):
    """Point is on (or too close to) the medial axis; closest point not unique."""


class BudgetExceeded(VorocrustError):
    """Sampling did not converge within the configured budget."""


class SideAmbiguous(VorocrustError):
    """A guide point classifies On the surface within tolerance."""


class DepthCapExceeded(VorocrustError):
    """Octree refinement hit the depth cap."""


class EmptyCell(VorocrustError):
    """Half-space clipping emptied a cell (tolerance failure for distinct seeds)."""


class UnboundedCell(VorocrustError):
    """A non-Upper cell still touches the clip box."""


class DegenerateCell(VorocrustError):
    """Cell too degenerate for inradius/outradius evaluation."""


class FormatError(VorocrustError):
    """Artifact file failed to parse."""
