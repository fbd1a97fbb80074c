"""Global distance, cut loci and diameter on a two-sphere of revolution.

Distance queries are reduced by the surface symmetries: rotate so the
first point sits at theta = 0 and reflect so the angular separation
dtheta lies in [0, pi].  Candidate connections are then geodesics shot
from the first point whose swept angle at a crossing of the target
parallel equals dtheta; candidates are detected on a 720-direction grid
and refined by bisection on the initial angle.  Meridian and equatorial
connections, and queries touching a pole, are handled in closed form.

Minimizers are reported in the reduced frame (start at (r_x, 0), swept
angle +dtheta); mapping back to the caller's frame is the rotation by
theta_x and, when the query was reflected, the mirror theta -> -theta,
both isometries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import qmc

from ._sweep import (ParallelCrossings, SweepCandidate, make_direction_fan,
                     merge_curves, refine_candidates, sweep_phi_grid)
from .errors import BisectionError
from .geodesic import GeodesicSegment, first_conjugate, shoot
from .surface import PI, PolarPoint, SurfaceModel

EXACT_TOL = 1e-12
ENDPOINT_TOL = 1e-7
LENGTH_TIE_TOL = 1e-8
DISTINCT_ANGLE_GAP = 1e-4
EQUATOR_SNAP = 1e-9
S_CAP = 1.6 * PI
CUT_PREDICATE_TOL = 1e-9
CUT_BISECTION_LO = 0.1


def _wrap_pi(x: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (x + PI) % (2.0 * PI) - PI


# ---------------------------------------------------------------------------
# minimizer bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimizerSpec:
    """Reduced-frame description of one minimizing connection.

    ``phi0``/``end_phi`` are the angles from the outward meridian at the
    two endpoints, enough to reconstruct both unit tangents without
    re-integrating the geodesic.
    """

    phi0: float
    length: float
    swept: float
    end_phi: float
    kind: str
    start: PolarPoint
    end: PolarPoint

    def start_tangent(self) -> Tuple[float, float]:
        return math.cos(self.phi0), math.sin(self.phi0)

    def end_tangent(self) -> Tuple[float, float]:
        return math.cos(self.end_phi), math.sin(self.end_phi)


class DistanceResult:
    """Distance value plus all found minimizing connections.

    ``minimizers`` rebuilds sampled geodesic segments on first access by
    re-shooting each minimizer from its own initial data; this is the
    expensive path and is only paid when segments are actually needed.
    """

    def __init__(self, surface: SurfaceModel, value: float,
                 specs: List[MinimizerSpec]):
        self.surface = surface
        self.value = float(value)
        self.minimizer_data = specs
        self.multiplicity = len(specs)

    @cached_property
    def minimizers(self) -> List[GeodesicSegment]:
        out = []
        for spec in self.minimizer_data:
            out.append(shoot(self.surface, spec.start, spec.phi0, spec.length))
        return out

    def __repr__(self):
        return (f"DistanceResult(value={self.value:.12g}, "
                f"multiplicity={self.multiplicity})")


def _spec_from_candidate(prof, cand: SweepCandidate, r0: float,
                         ry: float, dtheta: float) -> MinimizerSpec:
    f_ry = float(prof.f(ry))
    nu = float(prof.f(r0)) * math.sin(cand.phi0)
    if cand.kind == "sweep":
        sin_end = min(nu / f_ry, 1.0) if f_ry > 0 else 0.0
        end_phi = math.asin(sin_end)
        if cand.end_down:
            end_phi = PI - end_phi
    else:
        end_phi = cand.end_down and PI or 0.0
        if cand.kind == "equator":
            end_phi = PI / 2.0
    return MinimizerSpec(phi0=cand.phi0, length=cand.length,
                         swept=cand.swept, end_phi=end_phi, kind=cand.kind,
                         start=PolarPoint(r0, 0.0),
                         end=PolarPoint(ry, dtheta))


# ---------------------------------------------------------------------------
# the reduced query
# ---------------------------------------------------------------------------

class ReducedDistanceQuery:
    """Distance from (r0, 0) to (ry, dtheta) as a function of dtheta.

    The 720-direction crossing curves depend only on (r0, ry), so one
    instance serves every angular separation between the same pair of
    parallels; the comparison-angle machinery leans on this heavily.
    """

    def __init__(self, surface: SurfaceModel, r0: float, ry: float, fan=None):
        self.surface = surface
        self.prof = surface.profile
        self.r0 = float(r0)
        self.ry = float(ry)
        self.pc = ParallelCrossings(self.prof, self.r0, self.ry)
        if fan is not None:
            base = self.pc.curves(fan=fan)
            extras = self._boundary_angles()
            extras = [a for a in extras
                      if not np.any(np.abs(fan.phi0 - a) < 1e-12)]
            if extras:
                base = merge_curves(base, self.pc.curves(np.array(extras)))
            self.grid = base.phi0
            self.curves = base
        else:
            self.grid = self._phi_grid()
            self.curves = self.pc.curves(self.grid)
        self._dense = None

    def _boundary_angles(self):
        """Reachability boundary of the target: nu = f(ry)."""
        f_r0 = float(self.prof.f(self.r0))
        f_ry = float(self.prof.f(self.ry))
        out = []
        if f_ry < f_r0:
            a = math.asin(min(f_ry / f_r0, 1.0))
            out.extend([a, PI - a])
        from ._sweep import PHI_EPS
        return [a for a in out
                if PHI_EPS < a < PI - PHI_EPS and abs(a - PI / 2.0) > 1e-9]

    def _phi_grid(self, refine: int = 1) -> np.ndarray:
        """Sweep grid plus the exact reachability boundary of the target.

        The target parallel is reachable only where nu <= f(ry); the
        boundary angles arcsin(f(ry)/f(r0)) are inserted so brackets can
        reach the steep near-tangent connections just inside them.
        """
        g = sweep_phi_grid()
        if refine > 1:
            parts = [g]
            for j in range(1, refine):
                parts.append(g[:-1] + np.diff(g) * j / refine)
            g = np.sort(np.concatenate(parts))
        extra = self._boundary_angles()
        if extra:
            g = np.sort(np.concatenate([g, np.array(extra)]))
        return g

    def _analytic_candidates(self, dtheta: float) -> List[SweepCandidate]:
        prof, r0, ry = self.prof, self.r0, self.ry
        cands = []
        if dtheta <= EXACT_TOL:
            dr = abs(ry - r0)
            if dr > EXACT_TOL:
                cands.append(SweepCandidate(
                    phi0=0.0 if ry > r0 else PI, length=dr, swept=0.0,
                    end_down=ry < r0, kind="meridian-direct"))
        if abs(dtheta - PI) <= EXACT_TOL:
            cands.append(SweepCandidate(phi0=PI, length=r0 + ry, swept=PI,
                                        end_down=False, kind="meridian-pole-p"))
            cands.append(SweepCandidate(phi0=0.0, length=2.0 * PI - r0 - ry,
                                        swept=PI, end_down=True,
                                        kind="meridian-pole-q"))
        if dtheta > EXACT_TOL:
            for rc in prof.critical_radii:
                if abs(r0 - rc) <= EQUATOR_SNAP and abs(ry - rc) <= EQUATOR_SNAP:
                    cands.append(SweepCandidate(
                        phi0=PI / 2.0, length=float(prof.f(rc)) * dtheta,
                        swept=dtheta, end_down=False, kind="equator"))
        return cands

    def candidates(self, dtheta: float) -> List[SweepCandidate]:
        cands = refine_candidates(self.pc, self.curves, dtheta, S_CAP)
        if not cands and not (dtheta <= EXACT_TOL or abs(dtheta - PI) <= EXACT_TOL):
            # retry once on a denser grid before giving up
            if self._dense is None:
                fine = self._phi_grid(refine=4)
                self._dense = (fine, self.pc.curves(fine))
            cands = refine_candidates(self.pc, self._dense[1], dtheta, S_CAP)
        cands.extend(self._analytic_candidates(dtheta))
        return cands

    def evaluate(self, dtheta: float) -> Tuple[float, List[SweepCandidate]]:
        cands = self.candidates(dtheta)
        if not cands:
            raise BisectionError(
                "no geodesic connection found by the initial-angle sweep",
                r0=self.r0, ry=self.ry, dtheta=dtheta,
                grid_size=self.grid.size)
        best = min(c.length for c in cands)
        keep = [c for c in cands if c.length <= best + LENGTH_TIE_TOL]
        keep.sort(key=lambda c: c.phi0)
        distinct = []
        for c in keep:
            if all(abs(c.phi0 - d.phi0) > DISTINCT_ANGLE_GAP for d in distinct):
                distinct.append(c)
        return best, distinct

    def value(self, dtheta: float) -> float:
        return self.evaluate(dtheta)[0]

    def evaluate_specs(self, dtheta: float) -> Tuple[float, List[MinimizerSpec]]:
        value, cands = self.evaluate(dtheta)
        specs = [_spec_from_candidate(self.prof, c, self.r0, self.ry, dtheta)
                 for c in cands]
        return value, specs


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------

def _pole_result(surface, x: PolarPoint, y: PolarPoint) -> DistanceResult:
    """Distance where either endpoint is a pole: radial in closed form."""
    prof = surface.profile
    if x.is_pole and y.is_pole:
        if x.r == y.r:
            return DistanceResult(surface, 0.0, [])
        spec = MinimizerSpec(phi0=0.0, length=PI, swept=0.0, end_phi=0.0,
                             kind="meridian-from-pole", start=PolarPoint(x.r, 0.0),
                             end=PolarPoint(y.r, 0.0))
        return DistanceResult(surface, PI, [spec])
    if y.is_pole:
        # swap so the pole is the start; distance is symmetric
        x, y = y, x
    going_up = x.r == 0.0
    value = y.r if going_up else PI - y.r
    if value <= EXACT_TOL:
        return DistanceResult(surface, 0.0, [])
    spec = MinimizerSpec(phi0=0.0, length=value, swept=0.0,
                         end_phi=0.0 if going_up else PI,
                         kind="meridian-from-pole",
                         start=PolarPoint(x.r, 0.0), end=PolarPoint(y.r, 0.0))
    return DistanceResult(surface, value, [spec])


def distance(surface: SurfaceModel, x, y, *, _fan=None) -> DistanceResult:
    """Riemannian distance between two points, with all minimizers found.

    Accepts PolarPoint or (r, theta) pairs.  See the module docstring
    for the frame in which minimizers are reported.  ``_fan`` lets bulk
    callers with a fixed first point reuse the direction fan.
    """
    x = x if isinstance(x, PolarPoint) else PolarPoint(*x)
    y = y if isinstance(y, PolarPoint) else PolarPoint(*y)
    if x.is_pole or y.is_pole:
        return _pole_result(surface, x, y)

    dtheta = abs(_wrap_pi(y.theta - x.theta))
    if dtheta <= EXACT_TOL and abs(x.r - y.r) <= EXACT_TOL:
        return DistanceResult(surface, 0.0, [])

    query = ReducedDistanceQuery(surface, x.r, y.r, fan=_fan)
    value, specs = query.evaluate_specs(dtheta)
    return DistanceResult(surface, value, specs)


def distance_nmodel(surface: SurfaceModel, n: int, x, y) -> float:
    """Distance on the n-dimensional model with the same warping function.

    Points are (r, direction) with direction a unit vector on the
    (n-1)-sphere.  Every geodesic of the rotationally symmetric warped
    product lies in a totally geodesic 2-plane section, so the distance
    reduces to the 2D problem with dtheta the angle between directions.
    """
    if n < 2:
        raise ValueError("model dimension must be at least 2")
    rx, ux = x
    ry, uy = y
    ux = np.asarray(ux, dtype=float)
    uy = np.asarray(uy, dtype=float)
    if ux.shape != (n,) or uy.shape != (n,):
        raise ValueError(f"directions must be vectors in R^{n}")
    for u in (ux, uy):
        if abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise ValueError("directions must be unit vectors")
    dot = float(np.clip(np.dot(ux, uy), -1.0, 1.0))
    delta = math.acos(dot)
    return distance(surface, PolarPoint(rx, 0.0), PolarPoint(ry, delta)).value


# ---------------------------------------------------------------------------
# cut locus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutPoint:
    phi0: float
    cut_time: float
    point: PolarPoint
    meridian_deviation: float
    conjugate_time: Optional[float]


@dataclass
class CutLocusReport:
    base: PolarPoint
    cut_points: List[CutPoint]
    max_meridian_deviation: float
    errors: List[Tuple[float, str]] = field(default_factory=list)


def _meridian_deviation(base: PolarPoint, pt: PolarPoint) -> float:
    if pt.is_pole:
        return 0.0  # poles lie on every meridian
    return abs(_wrap_pi(pt.theta - (base.theta + PI)))


def cut_locus(surface: SurfaceModel, x, directions: int = 64) -> CutLocusReport:
    """Cut times and cut points for a fan of directions from x.

    For each initial angle on a uniform grid over [0, pi] (the mirror
    half is symmetric), the cut time is the largest t at which the shot
    geodesic still realizes the distance, located by bisection on the
    predicate d(x, gamma(t)) < t - 1e-9 and capped by the first
    conjugate point.  The report records how far each cut point strays
    from the opposite half meridian.
    """
    if directions < 8:
        raise ValueError("need at least 8 directions")
    x = x if isinstance(x, PolarPoint) else PolarPoint(*x)
    horizon = PI + 0.02
    cap = PI + 1e-3
    fan = None if x.is_pole else make_direction_fan(surface.profile, x.r)
    entries: List[CutPoint] = []
    errors: List[Tuple[float, str]] = []
    for phi0 in np.linspace(0.0, PI, directions):
        try:
            jac = first_conjugate(surface, x, float(phi0), horizon=horizon)
            conj = jac.first_conjugate
            seg = jac.geodesic
            hi = min(conj if conj is not None else np.inf, cap)

            def past_cut(t: float) -> bool:
                pt = seg.point_at(t)
                return (distance(surface, x, pt, _fan=fan).value
                        < t - CUT_PREDICATE_TOL)

            lo = CUT_BISECTION_LO
            if past_cut(lo):
                errors.append((float(phi0), "cut point before bisection window"))
                continue
            if not past_cut(hi):
                cut_t = hi
            else:
                a, b = lo, hi
                while b - a > 5e-8:
                    m = 0.5 * (a + b)
                    if past_cut(m):
                        b = m
                    else:
                        a = m
                cut_t = 0.5 * (a + b)
            pt = seg.point_at(cut_t)
            entries.append(CutPoint(phi0=float(phi0), cut_time=float(cut_t),
                                    point=pt,
                                    meridian_deviation=_meridian_deviation(x, pt),
                                    conjugate_time=conj))
        except Exception as exc:  # per-direction failures must not abort
            errors.append((float(phi0), f"{type(exc).__name__}: {exc}"))
    max_dev = max((e.meridian_deviation for e in entries), default=float("nan"))
    return CutLocusReport(base=x, cut_points=entries,
                          max_meridian_deviation=max_dev, errors=errors)


# ---------------------------------------------------------------------------
# diameter and parallel monotonicity
# ---------------------------------------------------------------------------

def diameter(surface: SurfaceModel, sample_count: int = 200) -> float:
    """Max distance over a low-discrepancy set of point pairs plus the poles.

    The pole pair realizes the diameter pi exactly for every valid
    model; the quasi-random pairs bound the estimate from below and
    double as a no-pair-exceeds-pi sanity sweep.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    halton = qmc.Halton(d=4, scramble=False)
    pts = halton.random(sample_count)
    best = distance(surface, surface.pole_p, surface.pole_q).value
    for row in pts:
        a = PolarPoint(row[0] * PI, row[1] * 2.0 * PI)
        b = PolarPoint(row[2] * PI, row[3] * 2.0 * PI)
        best = max(best, distance(surface, a, b).value)
    return best


@dataclass
class MonotonicityReport:
    x_r: float
    c: float
    theta_pairs: List[Tuple[float, float]]
    margins: np.ndarray
    min_margin: float
    all_positive: bool


def parallel_monotonicity_check(surface: SurfaceModel, x_r: float, c: float,
                                theta_pairs) -> MonotonicityReport:
    """Margins d(x, sigma_c(theta2)) - d(x, sigma_c(theta1)) for pairs.

    x = (x_r, 0) and 0 <= theta1 < theta2 <= pi per pair; positive
    margins mean distance to the parallel r = c grows strictly with the
    angular separation.
    """
    if not (0.0 < c < PI):
        raise ValueError("parallel radius must lie in (0, pi)")
    pairs = [(float(t1), float(t2)) for t1, t2 in theta_pairs]
    for t1, t2 in pairs:
        if not (0.0 <= t1 <= t2 <= PI):
            raise ValueError(f"need 0 <= theta1 <= theta2 <= pi, got {(t1, t2)}")
    query = ReducedDistanceQuery(surface, float(x_r), float(c))
    margins = np.array([query.value(t2) - query.value(t1) if t2 > t1 else 0.0
                        for t1, t2 in pairs])
    return MonotonicityReport(x_r=float(x_r), c=float(c), theta_pairs=pairs,
                              margins=margins,
                              min_margin=float(np.min(margins)) if len(pairs) else 0.0,
                              all_positive=bool(np.all(margins > 0.0)))
