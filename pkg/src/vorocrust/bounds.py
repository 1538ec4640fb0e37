"""Parametric quality bounds, evaluated from run parameters (eps, sigma, delta).

Every bound the verifier compares against is computed here from the run's
parameters. Each closed form has a validity domain; outside it the value is
reported as None and the corresponding check becomes non-gating. The headline
constants quoted alongside are the asymptotic (eps -> 0) values retained for
documentation and for the few checks that are pinned to them directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Asymptotic headline constants (documentation + pinned checks).
CIRCUMRADIUS_FACTOR_HEADLINE = 1.38   # circumradius / (delta * lfs)
CIRCUMRADIUS_EDGE_HEADLINE = 3.68     # circumradius / shortest edge
NORMAL_DEV_FACTOR_HEADLINE = 6.6      # triangle-normal deviation / delta (radians)
SURFACE_NORMAL_DEV_HEADLINE = 2.03    # surface-normal variation / delta (radians)
DISTANCE_FACTOR_HEADLINE = 30.52      # two-sided distance / (eps^2 * lfs)
INTERIOR_FATNESS_HEADLINE = 14.1
BOUNDARY_FATNESS_HEADLINE = 13.65
ELEVATION_HEADLINE_DEG = 29.34
MIN_ANGLE_HEADLINE_DEG = 7.8
MAX_ANGLE_HEADLINE_DEG = 165.0
ALTITUDE_HEADLINE = 0.067
CELL_INRADIUS_FACTOR_HEADLINE = 0.3
MESH_SIZE_CONST = 18.0 * math.sqrt(3.0) / math.pi
MONOTONE_BAND_FACTOR = 0.96           # normal-segment half-length / (eps * lfs)
CIRCUMRADIUS_STRICT_EPS = 0.02        # circumradius headline asserted only here


def kappa(delta: float) -> float:
    """Upper edge factor: neighboring sample distance <= kappa*delta*lfs."""
    return 2.0 / (1.0 - delta)


def kappa_eps(eps: float, sigma: float) -> float:
    """Lower edge factor from sparsity: distance >= kappa_eps*lfs."""
    return sigma * eps / (1.0 + sigma * eps)


def edge_band(eps: float, sigma: float, delta: float) -> tuple[float, float]:
    """Neighboring-sample distance band [lo, hi] as multiples of lfs."""
    return kappa_eps(eps, sigma), kappa(delta) * delta


def edge_ratio_bound(eps: float, sigma: float, delta: float) -> float:
    """Longest/shortest edge of a guide triangle."""
    return kappa(delta) * delta / kappa_eps(eps, sigma)


def alpha_sq(eps: float, sigma: float, delta: float) -> float:
    kd = kappa(delta) * delta
    return kappa(delta) * delta**3 * (2.0 + kd) / (sigma**2 * eps**2 * (1.0 - kd) ** 2)


def circumradius_factor(eps: float, sigma: float, delta: float):
    """Circumradius/(delta*lfs) bound; None outside the closed form's domain."""
    a2 = alpha_sq(eps, sigma, delta)
    if a2 >= 0.25:
        return None
    kd = kappa(delta) * delta
    return (1.0 + kd) / math.sqrt(1.0 - 4.0 * a2)


def circumradius_edge_factor(eps: float, sigma: float, delta: float):
    """Circumradius/shortest-edge bound; None outside the domain."""
    a2 = alpha_sq(eps, sigma, delta)
    if a2 >= 0.25:
        return None
    kd = kappa(delta) * delta
    c_rad = 1.0 / math.sqrt(1.0 - 4.0 * a2)
    return delta * c_rad / (sigma * eps * (1.0 - kd))


def normal_dev_factor(delta: float):
    """Triangle-normal deviation bound as a multiple of delta (radians)."""
    kd = kappa(delta) * delta
    if kd >= 1.0 / 3.0:
        return None
    return kappa(delta) / (1.0 - kd) + 4.57


def elevation_min(eps: float):
    """Minimum seed elevation above the tangent plane, radians."""
    s = 0.5 - 5.0 * eps + 2.0 * eps**3
    if not 0.0 < s < 1.0:
        return None
    return math.asin(s)


def seed_height(eps: float, sigma: float, delta: float):
    """Lower bound on seed height above its own triangle plane, / (delta*lfs)."""
    nd = normal_dev_factor(delta)
    if nd is None:
        return None
    return 0.5 - (5.0 + 2.0 * nd) * eps


def min_angle_bound(eps: float, sigma: float, delta: float):
    """Guide-triangle minimum angle, radians; uses the headline edge factor
    when the parametric circumradius form is out of domain."""
    rbf = circumradius_edge_factor(eps, sigma, delta)
    parametric = rbf is not None
    rbf_used = rbf if parametric else CIRCUMRADIUS_EDGE_HEADLINE
    return math.asin(1.0 / (2.0 * rbf_used)), parametric


def altitude_bound(eps: float, sigma: float, delta: float):
    """Smallest-altitude/longest-edge bound."""
    rbf = circumradius_edge_factor(eps, sigma, delta)
    parametric = rbf is not None
    rbf_used = rbf if parametric else CIRCUMRADIUS_EDGE_HEADLINE
    return 1.0 / (4.0 * rbf_used), parametric


def cell_inradius_factor(eps: float, sigma: float, delta: float):
    """Boundary-cell inradius / (delta*lfs); None when out of domain."""
    hs = seed_height(eps, sigma, delta)
    if hs is None or hs <= 0.0:
        return None
    rbf = circumradius_edge_factor(eps, sigma, delta)
    rbf_used = rbf if rbf is not None else CIRCUMRADIUS_EDGE_HEADLINE
    return hs / (1.0 + 3.0 / (2.0 * sigma * rbf_used))


def interior_fatness_bound(delta: float):
    if delta >= 1.0 / 3.0:
        return None
    return 8.0 * math.sqrt(3.0) * (1.0 + delta) / (1.0 - 3.0 * delta)


def boundary_fatness_bound(eps: float, sigma: float, delta: float):
    rv = cell_inradius_factor(eps, sigma, delta)
    if rv is None or delta >= 1.0 / 3.0:
        return None
    return 4.0 * (1.0 + delta) / ((1.0 - 3.0 * delta) * (1.0 - delta) ** 2 * rv)


def cell_outradius_factor(delta: float):
    """Volume-cell circumradius / (delta*lfs at the seed), octree-graded runs."""
    if delta >= 1.0 / 3.0:
        return None
    return 2.0 / (1.0 - 3.0 * delta)


def distance_bound(eps: float) -> float:
    """Two-sided surface distance as a fraction of lfs."""
    return DISTANCE_FACTOR_HEADLINE * eps * eps


def leaf_radius_band(delta: float) -> tuple[float, float]:
    """Octree leaf half-diagonal as a multiple of sizing at the leaf center."""
    return delta / (2.0 + delta), delta


def leaf_point_band(delta: float) -> tuple[float, float]:
    """Leaf half-diagonal as a multiple of sizing at any point inside the leaf."""
    return delta / (2.0 * (1.0 + delta)), delta / (1.0 - delta)


def interior_seed_bound(eps: float, lfs_integral: float) -> float:
    """Interior seed count bound given the integral of lfs^-3 over the volume."""
    return MESH_SIZE_CONST * lfs_integral / eps**3


@dataclass(frozen=True)
class RunBounds:
    """All bounds evaluated for one run; None marks out-of-domain forms."""

    eps: float
    sigma: float
    delta: float
    edge_lo: float
    edge_hi: float
    edge_ratio: float
    circumradius_factor: object
    circumradius_edge_factor: object
    normal_dev: object           # radians
    elevation: object            # radians
    min_angle: float             # radians
    min_angle_parametric: bool
    altitude: float
    altitude_parametric: bool
    interior_fatness: object
    boundary_fatness: object
    distance_rel: float
    sigma_at_least_3_4: bool
    sigma_at_least_3_2: bool


def evaluate(eps: float, sigma: float, delta: float) -> RunBounds:
    lo, hi = edge_band(eps, sigma, delta)
    nd = normal_dev_factor(delta)
    ang, ang_param = min_angle_bound(eps, sigma, delta)
    alt, alt_param = altitude_bound(eps, sigma, delta)
    return RunBounds(
        eps=eps,
        sigma=sigma,
        delta=delta,
        edge_lo=lo,
        edge_hi=hi,
        edge_ratio=edge_ratio_bound(eps, sigma, delta),
        circumradius_factor=circumradius_factor(eps, sigma, delta),
        circumradius_edge_factor=circumradius_edge_factor(eps, sigma, delta),
        normal_dev=None if nd is None else nd * delta,
        elevation=elevation_min(eps),
        min_angle=ang,
        min_angle_parametric=ang_param,
        altitude=alt,
        altitude_parametric=alt_param,
        interior_fatness=interior_fatness_bound(delta),
        boundary_fatness=boundary_fatness_bound(eps, sigma, delta),
        distance_rel=distance_bound(eps),
        sigma_at_least_3_4=sigma >= 0.75,
        sigma_at_least_3_2=sigma >= 1.5,
    )
