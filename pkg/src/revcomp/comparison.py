"""Comparison-triangle machinery between two surfaces of revolution.

Triangles here always carry the base point at a pole, where rotational
symmetry makes the two radial edges exactly minimizing, so every angle
is computable from minimizer tangent data alone.  The comparison angle
for sides (a, b, c) is the apex angle of the triangle in the model
surface whose radial sides are a and c and whose opposite side is b; it
is unique because distance to a parallel grows strictly with angular
separation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import ComparisonFalsification, TriangleDomainError
from .geodesic import GeodesicSegment, meridian, shoot
from .metricspace import ReducedDistanceQuery, _wrap_pi, cut_locus, distance
from .surface import PI, PolarPoint, SurfaceModel, check_radial_bound

ANGLE_BRACKET_EPS = 1e-9
ANGLE_TOL = 1e-11
ANGLE_MAX_ITER = 200
EQUALITY_TOL = 1e-5
MARGIN_TOL = 1e-6
STEP_TOL = 1e-6


# ---------------------------------------------------------------------------
# triangle sides and the admissible set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriangleSides:
    """Side lengths (a, b, c): radial, opposite, radial."""

    a: float
    b: float
    c: float

    def as_tuple(self):
        return (self.a, self.b, self.c)


def side_domain_report(surface: SurfaceModel, sides: TriangleSides,
                       query: ReducedDistanceQuery = None):
    """Check membership of (a, b, c) in the admissible side set.

    Requires a, b, c > 0 and |a - c| < b < d(mu_0(a), mu_pi(c)); returns
    (ok, reason, query) with the reduced query reused for the solve.
    """
    a, b, c = sides.as_tuple()
    if min(a, b, c) <= 0.0:
        return False, f"sides must be positive, got {sides.as_tuple()}", None
    if a >= PI or c >= PI:
        return False, "radial sides must be shorter than the half meridian", None
    if b <= abs(a - c):
        return False, (f"opposite side b={b:.6g} must exceed |a-c|="
                       f"{abs(a - c):.6g}"), None
    if query is None:
        query = ReducedDistanceQuery(surface, a, c)
    upper = query.value(PI)
    if b >= upper:
        return False, (f"opposite side b={b:.6g} must be below the "
                       f"antimeridian distance {upper:.6g}"), query
    return True, "", query


def comparison_angle(surface: SurfaceModel, sides, *,
                     query: ReducedDistanceQuery = None,
                     bracket: Tuple[float, float] = None) -> float:
    """Apex angle theta with d(mu_0(a), mu_theta(c)) = b, in (0, pi).

    Solved by bracketed root finding on the angular separation; the
    distance is strictly increasing in the separation, so the root is
    unique.  ``bracket`` is an optional warm-start interval; it falls
    back to the full bracket when the sign condition fails.
    """
    sides = sides if isinstance(sides, TriangleSides) else TriangleSides(*sides)
    ok, reason, query = side_domain_report(surface, sides, query)
    if not ok:
        raise TriangleDomainError(reason)
    b = sides.b

    def g(theta):
        return query.value(theta) - b

    lo, hi = ANGLE_BRACKET_EPS, PI - ANGLE_BRACKET_EPS
    if bracket is not None:
        blo = max(bracket[0], ANGLE_BRACKET_EPS)
        bhi = min(bracket[1], PI - ANGLE_BRACKET_EPS)
        if blo < bhi and g(blo) <= 0.0 <= g(bhi):
            lo, hi = blo, bhi
    glo = g(lo)
    if glo >= 0.0:
        return lo   # root squeezed below the bracket floor: b ~ |a-c|
    ghi = g(hi)
    if ghi <= 0.0:
        return hi   # root above the ceiling: b ~ the antimeridian distance
    return brentq(g, lo, hi, xtol=ANGLE_TOL, maxiter=ANGLE_MAX_ITER)


# ---------------------------------------------------------------------------
# geodesic triangles with the apex at a pole
# ---------------------------------------------------------------------------

class SurfaceTriangle:
    """Geodesic triangle (p, x, y) with p the pole r = 0.

    ``angles`` are (at p, at x, at y); the radial edges are exactly
    minimizing by rotational symmetry, and the angles at x and y come
    from the tangent data of the x-y minimizer.  ``edges`` rebuilds the
    three sampled segments on demand.
    """

    def __init__(self, surface: SurfaceModel, x: PolarPoint, y: PolarPoint):
        self.surface = surface
        self.x = x
        self.y = y
        a = x.r
        c = y.r
        res = distance(surface, x, y)
        self.sides = TriangleSides(a=a, b=res.value, c=c)
        self.multiplicity = res.multiplicity
        spec = res.minimizer_data[0]
        apex = abs(_wrap_pi(y.theta - x.theta))
        self.angles = (apex, PI - spec.phi0, spec.end_phi)
        self._spec = spec

    @property
    def vertices(self):
        return (self.surface.pole_p, self.x, self.y)

    @cached_property
    def edges(self) -> List[GeodesicSegment]:
        """Minimizing segments (p->x, p->y, x->y); x->y in reduced frame."""
        e1 = shoot(self.surface, self.surface.pole_p, self.x.theta, self.x.r)
        e2 = shoot(self.surface, self.surface.pole_p, self.y.theta, self.y.r)
        e3 = shoot(self.surface, self._spec.start, self._spec.phi0,
                   self._spec.length)
        return [e1, e2, e3]


def triangle_with_apex(surface: SurfaceModel, x, y) -> SurfaceTriangle:
    x = x if isinstance(x, PolarPoint) else PolarPoint(*x)
    y = y if isinstance(y, PolarPoint) else PolarPoint(*y)
    return SurfaceTriangle(surface, x, y)


# ---------------------------------------------------------------------------
# the comparison inequality check
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    """Side residuals and angle margins against the comparison triangle."""

    sides_match: Tuple[float, float, float]
    angle_margins: Tuple[float, float, float]
    equality_case: bool
    angles: Tuple[float, float, float]
    comparison_angles: Tuple[float, float, float]
    sides: TriangleSides


def toponogov_check(M: SurfaceModel, Mtilde: SurfaceModel,
                    triangle: SurfaceTriangle) -> ComparisonReport:
    """Match side lengths in the model surface and compare the angles.

    Requires the radial curvature lower-bound hypothesis (checked).  A
    comparison triangle with equal sides is built by solving for the
    apex angle; if the sides leave the admissible set the side-matching
    system is unsatisfiable and a ComparisonFalsification is raised.
    """
    if M is not Mtilde and not check_radial_bound(M, Mtilde).holds:
        raise ValueError("the radial curvature lower bound does not hold "
                         "for this surface pair")
    sides = triangle.sides
    query = ReducedDistanceQuery(Mtilde, sides.a, sides.c)
    try:
        theta = comparison_angle(Mtilde, sides, query=query)
    except TriangleDomainError as exc:
        raise ComparisonFalsification(
            f"comparison sides {sides.as_tuple()} admit no matching "
            f"triangle: {exc}") from exc
    value, specs = query.evaluate_specs(theta)
    spec = specs[0]
    comp_angles = (theta, PI - spec.phi0, spec.end_phi)
    residuals = (0.0, abs(value - sides.b), 0.0)
    margins = tuple(am - cm for am, cm in zip(triangle.angles, comp_angles))
    return ComparisonReport(
        sides_match=residuals,
        angle_margins=margins,
        equality_case=abs(margins[0]) <= EQUALITY_TOL,
        angles=triangle.angles,
        comparison_angles=comp_angles,
        sides=sides)


# ---------------------------------------------------------------------------
# generalized first variation
# ---------------------------------------------------------------------------

@dataclass
class VariationReport:
    t0: float
    psi_value: float
    analytic_derivative: float
    numeric_derivative: float
    residual: float
    h: float
    unique_minimizer: bool
    one_sided: Optional[Tuple[float, float]] = None


def _segment_tangent(seg: GeodesicSegment, t: float) -> Tuple[float, float]:
    st = seg.state_at(t)
    return math.cos(st.phi), math.sin(st.phi)


def _connection_tangents(surface, p_from: PolarPoint, p_to: PolarPoint):
    """Tangents of a minimizer at both endpoints, in the global frame.

    Returns (tangent at p_from, tangent at p_to, multiplicity); the
    reduced-frame minimizer is reflected back when the target sits at
    negative angular separation.
    """
    res = distance(surface, p_from, p_to)
    spec = res.minimizer_data[0]
    sigma = 1.0 if _wrap_pi(p_to.theta - p_from.theta) >= 0.0 else -1.0
    t_start = (math.cos(spec.phi0), sigma * math.sin(spec.phi0))
    t_end = (math.cos(spec.end_phi), sigma * math.sin(spec.end_phi))
    return t_start, t_end, res.multiplicity, res.value


def first_variation_check(M: SurfaceModel, mu: GeodesicSegment,
                          eta: GeodesicSegment, t0: float,
                          h: float = 1e-3) -> VariationReport:
    """Compare the first-variation formula with a finite difference.

    The analytic side is -<mu', gamma'(0)> + <eta', gamma'(psi)> with
    gamma the minimizer between mu(t0) and eta(t0); with a unique
    minimizer the residual shrinks linearly in h.  When several
    minimizers exist the one-sided derivatives are reported separately
    (each matched to the limit minimizer from its side) instead of
    failing.
    """
    p_mu = mu.point_at(t0)
    p_eta = eta.point_at(t0)
    g_start, g_end, multiplicity, psi0 = _connection_tangents(M, p_mu, p_eta)
    if psi0 <= 0.0:
        raise ValueError("the variation formula needs psi(t0) > 0")
    mu_t = _segment_tangent(mu, t0)
    eta_t = _segment_tangent(eta, t0)

    def analytic_for(gs, ge):
        return (-(mu_t[0] * gs[0] + mu_t[1] * gs[1])
                + (eta_t[0] * ge[0] + eta_t[1] * ge[1]))

    def psi(t):
        return distance(M, mu.point_at(t), eta.point_at(t)).value

    analytic = analytic_for(g_start, g_end)
    numeric = (psi(t0 + h) - psi0) / h

    one_sided = None
    if multiplicity > 1:
        backward = (psi(t0 - h) - psi0) / (-h)
        one_sided = (numeric, backward)
    return VariationReport(t0=t0, psi_value=psi0,
                           analytic_derivative=analytic,
                           numeric_derivative=numeric,
                           residual=abs(analytic - numeric), h=h,
                           unique_minimizer=multiplicity == 1,
                           one_sided=one_sided)


@dataclass
class VariationLadder:
    reports: List[VariationReport]
    order: float
    extrapolated_residual: float


def first_variation_ladder(M: SurfaceModel, mu: GeodesicSegment,
                           eta: GeodesicSegment, t0: float,
                           hs: Sequence[float] = (1e-3, 5e-4, 2.5e-4)
                           ) -> VariationLadder:
    """Richardson ladder of first-variation residuals.

    The one-sided difference carries an O(h) error, so residuals should
    fall linearly in h; the reported order is the log-log slope and the
    extrapolated residual uses second-order Richardson elimination of
    the h and h^2 terms.
    """
    reports = [first_variation_check(M, mu, eta, t0, h=h) for h in hs]
    analytic = reports[0].analytic_derivative
    res = np.array([r.residual for r in reports])
    hs_arr = np.array(list(hs))
    with np.errstate(divide="ignore"):
        slope = np.polyfit(np.log(hs_arr), np.log(np.maximum(res, 1e-300)), 1)[0]
    d = [r.numeric_derivative for r in reports]
    r1 = 2.0 * d[1] - d[0]
    r2 = 2.0 * d[2] - d[1]
    extrap = (4.0 * r2 - r1) / 3.0
    return VariationLadder(reports=reports, order=float(slope),
                           extrapolated_residual=abs(extrap - analytic))


# ---------------------------------------------------------------------------
# monotonicity of the comparison angle along shrinking triangles
# ---------------------------------------------------------------------------

@dataclass
class AngleMonotonicityReport:
    ts: np.ndarray
    thetas: np.ndarray
    max_step_increase: float
    monotone: bool
    t0_extrapolated: float
    apex_angle: float
    failures: List[Tuple[float, str]] = field(default_factory=list)


def angle_monotonicity_check(M: SurfaceModel, Mtilde: SurfaceModel,
                             x, y, steps: int = 64) -> AngleMonotonicityReport:
    """Comparison apex angle along proportionally shrunk triangles.

    The edges from the pole to x and y are shrunk proportionally; at
    each t the comparison angle for sides (a*t, d(x(t), y(t)), c*t) is
    computed in the model surface.  The sequence must be non-increasing
    within 1e-6 per step; the t->0 limit (linear extrapolation from the
    two smallest grid points) should recover the apex angle at the pole.
    """
    if M is not Mtilde and not check_radial_bound(M, Mtilde).holds:
        raise ValueError("the radial curvature lower bound does not hold "
                         "for this surface pair")
    x = x if isinstance(x, PolarPoint) else PolarPoint(*x)
    y = y if isinstance(y, PolarPoint) else PolarPoint(*y)
    a, c = x.r, y.r
    apex = abs(_wrap_pi(y.theta - x.theta))
    ts = (np.arange(steps) + 1.0) / steps
    thetas = np.full(steps, np.nan)
    failures: List[Tuple[float, str]] = []
    prev = None
    for i, t in enumerate(ts):
        xt = PolarPoint(a * t, x.theta)
        yt = PolarPoint(c * t, y.theta)
        b_t = distance(M, xt, yt).value
        bracket = None
        if prev is not None:
            bracket = (prev - 0.15, prev + 0.15)
        try:
            th = comparison_angle(Mtilde, TriangleSides(a * t, b_t, c * t),
                                  bracket=bracket)
        except TriangleDomainError as exc:
            failures.append((float(t), str(exc)))
            continue
        thetas[i] = th
        prev = th
    good = ~np.isnan(thetas)
    diffs = np.diff(thetas[good])
    max_inc = float(np.max(diffs)) if diffs.size else 0.0
    tg = ts[good]
    th_g = thetas[good]
    if len(th_g) >= 2:
        t0_extrap = float(th_g[0] + (th_g[1] - th_g[0])
                          * (0.0 - tg[0]) / (tg[1] - tg[0]))
    else:
        t0_extrap = float("nan")
    return AngleMonotonicityReport(ts=ts, thetas=thetas,
                                   max_step_increase=max_inc,
                                   monotone=max_inc <= STEP_TOL,
                                   t0_extrapolated=t0_extrap,
                                   apex_angle=apex, failures=failures)


# ---------------------------------------------------------------------------
# rigidity probes at the diameter
# ---------------------------------------------------------------------------

@dataclass
class RigidityReport:
    status: str
    d_xy: float
    angle_at_base: float
    base_split_residual: float
    perimeter_residual: float
    z_residuals: np.ndarray
    cut_time_max_dev: float
    cut_point_max_dist: float


def rigidity_probe(M: SurfaceModel, x, y, z_samples,
                   base: PolarPoint = None,
                   cut_directions: int = 16) -> RigidityReport:
    """Structure checks at a diameter-realizing pair d(x, y) = pi.

    Verifies the angle pi at the base point (the two minimizers to x
    and y form one geodesic through it), the perimeter 2*pi of the
    triangle (base, x, y), the splitting d(x,z) + d(z,y) = pi for the
    sampled z, and that the cut locus of x collapses to y at arclength
    pi.  If d(x, y) is not pi within 1e-5 the equality case is not
    realized and the probe only reports that diagnostic.
    """
    x = x if isinstance(x, PolarPoint) else PolarPoint(*x)
    y = y if isinstance(y, PolarPoint) else PolarPoint(*y)
    d_xy = distance(M, x, y).value
    if abs(d_xy - PI) > EQUALITY_TOL:
        return RigidityReport(status="equality case not realized",
                              d_xy=d_xy, angle_at_base=float("nan"),
                              base_split_residual=float("nan"),
                              perimeter_residual=float("nan"),
                              z_residuals=np.array([]),
                              cut_time_max_dev=float("nan"),
                              cut_point_max_dist=float("nan"))

    if base is None:
        if x.is_pole or y.is_pole:
            # a pole pair realizes the diameter; probe from the equator
            base = PolarPoint(PI / 2.0, x.theta + PI / 2.0)
        else:
            base = M.pole_p

    if base.is_pole:
        angle = abs(_wrap_pi(y.theta - x.theta))
        d_bx, d_by = x.r, y.r
    else:
        tx, _, _, d_bx = _connection_tangents(M, base, x)
        ty, _, _, d_by = _connection_tangents(M, base, y)
        dot = tx[0] * ty[0] + tx[1] * ty[1]
        angle = math.acos(min(1.0, max(-1.0, dot)))
    split = abs(d_bx + d_by - PI)
    perimeter = abs(d_bx + d_by + d_xy - 2.0 * PI)

    z_res = []
    for z in z_samples:
        z = z if isinstance(z, PolarPoint) else PolarPoint(*z)
        z_res.append(abs(distance(M, x, z).value
                         + distance(M, z, y).value - PI))

    rep = cut_locus(M, x, directions=cut_directions)
    ct_dev = max((abs(cp.cut_time - PI) for cp in rep.cut_points),
                 default=float("nan"))
    cp_dist = max((distance(M, cp.point, y).value for cp in rep.cut_points),
                  default=float("nan"))
    return RigidityReport(status="ok", d_xy=d_xy, angle_at_base=angle,
                          base_split_residual=split,
                          perimeter_residual=perimeter,
                          z_residuals=np.array(z_res),
                          cut_time_max_dev=ct_dev,
                          cut_point_max_dist=cp_dist)


# ---------------------------------------------------------------------------
# empirical Lipschitz probe for the comparison angle
# ---------------------------------------------------------------------------

@dataclass
class LipschitzReport:
    max_ratio: float
    pairs_used: int
    lower_ratio_min: float
    predicted_floor: float
    min_edge_angle: float


def lipschitz_probe(surface: SurfaceModel, region, samples: int,
                    rng=None) -> LipschitzReport:
    """Empirical local Lipschitz data for the comparison angle.

    ``region`` is ((a_lo, a_hi), (b_lo, b_hi), (c_lo, c_hi)), compactly
    inside the admissible side set.  The probe reports the largest
    observed |d theta| / |d sides| ratio and, over same-(a, c) pairs
    with varying separation, the smallest |d b| / |d theta| ratio
    together with its predicted floor f(c) * sin(smallest angle between
    the connecting minimizer and the meridian at the moving endpoint).
    """
    rng = np.random.default_rng(rng)
    (a0, a1), (b0, b1), (c0, c1) = region

    triples = []
    guard = 0
    while len(triples) < samples and guard < 50 * samples:
        guard += 1
        s = TriangleSides(rng.uniform(a0, a1), rng.uniform(b0, b1),
                          rng.uniform(c0, c1))
        ok, _, q = side_domain_report(surface, s)
        if ok:
            triples.append((s, comparison_angle(surface, s, query=q)))
    max_ratio = 0.0
    used = 0
    for i in range(0, len(triples) - 1, 2):
        s1, th1 = triples[i]
        s2, th2 = triples[i + 1]
        step = math.dist(s1.as_tuple(), s2.as_tuple())
        if step < 1e-12:
            continue
        used += 1
        max_ratio = max(max_ratio, abs(th2 - th1) / step)

    # same-(a, c) pairs probe the angular lower bound: the derivative of
    # the distance in the separation is f(c) * sin(angle between the
    # minimizer and the meridian at the moving endpoint)
    lower_min = math.inf
    floor_at_min = float("nan")
    min_edge = math.inf
    f = surface.profile.f
    for _ in range(max(8, samples // 4)):
        a = rng.uniform(a0, a1)
        c = rng.uniform(c0, c1)
        query = ReducedDistanceQuery(surface, a, c)
        th1, th2 = sorted(rng.uniform(0.2, PI - 0.2, size=2))
        if th2 - th1 < 1e-3:
            continue
        v1, k1 = query.evaluate(th1)
        v2, k2 = query.evaluate(th2)
        ratio = abs(v2 - v1) / (th2 - th1)
        f_a, f_c = float(f(a)), float(f(c))
        edge = PI / 2.0
        for cand in (k1[0], k2[0]):
            sin_end = min(1.0, f_a * abs(math.sin(cand.phi0)) / f_c)
            edge = min(edge, math.asin(sin_end))
        min_edge = min(min_edge, edge)
        if ratio < lower_min:
            lower_min = ratio
            floor_at_min = f_c * math.sin(edge)
    return LipschitzReport(max_ratio=max_ratio, pairs_used=used,
                           lower_ratio_min=lower_min,
                           predicted_floor=floor_at_min,
                           min_edge_angle=min_edge)
