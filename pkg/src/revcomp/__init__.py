"""revcomp: geodesy and comparison geometry on two-spheres of revolution.

The package builds rotationally symmetric spheres from warping profiles,
integrates their geodesics, computes global distances, cut loci and
diameters, and runs comparison-triangle checks between pairs of such
surfaces, all with tolerances tight enough for property-based testing
against closed-form oracles.
"""

from .errors import (BisectionError, ComparisonFalsification,
                     IntegrationError, InvalidProfileError, RevcompError,
                     TriangleDomainError)
from .geodesic import (GeodesicSegment, GeodesicState, JacobiSolution,
                       first_conjugate, meridian, parallel, shoot,
                       unit_speed_defect)
from .metricspace import (CutLocusReport, CutPoint, DistanceResult,
                          MinimizerSpec, MonotonicityReport, cut_locus,
                          diameter, distance, distance_nmodel,
                          parallel_monotonicity_check)
from .surface import (PolarPoint, RadialBoundReport, SurfaceModel,
                      WarpingProfile, check_radial_bound, gaussian_curvature,
                      make_custom, make_prolate_ellipsoid, make_unit_sphere)

__all__ = [
    "BisectionError", "ComparisonFalsification", "IntegrationError",
    "InvalidProfileError", "RevcompError", "TriangleDomainError",
    "GeodesicSegment", "GeodesicState", "JacobiSolution",
    "first_conjugate", "meridian", "parallel", "shoot", "unit_speed_defect",
    "CutLocusReport", "CutPoint", "DistanceResult", "MinimizerSpec",
    "MonotonicityReport", "cut_locus", "diameter", "distance",
    "distance_nmodel", "parallel_monotonicity_check",
    "PolarPoint", "RadialBoundReport", "SurfaceModel", "WarpingProfile",
    "check_radial_bound", "gaussian_curvature", "make_custom",
    "make_prolate_ellipsoid", "make_unit_sphere",
]

__version__ = "0.1.0"
