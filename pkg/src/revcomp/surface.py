"""Two-spheres of revolution: warping profiles, built-in models, validation.

A surface here is a sphere-topology surface of revolution with metric
``dr^2 + f(r)^2 dtheta^2`` in geodesic polar coordinates about one pole.
Every surface is rescaled at construction so the pole-to-pole meridian
distance equals pi; ``raw_length`` keeps the pre-scaling length so tests
can undo the normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from numpy.polynomial import polynomial as _poly
from scipy.interpolate import CubicSpline, PPoly
from scipy.optimize import brentq

from .errors import InvalidProfileError

PI = float(np.pi)

# Construction tolerances.  Endpoint zeros are exact up to rounding; the
# pole slopes +1/-1 are what make the metric smooth across the poles.
ENDPOINT_TOL = 1e-12
POLE_SLOPE_TOL = 1e-9
SYMMETRY_TOL = 1e-9
POLE_SNAP_TOL = 1e-12

VALIDATION_GRID = 10_000
# Strict-monotonicity flags are measured on a coarser grid so that the
# comparison of adjacent values stays above interpolation noise for
# spline-backed custom profiles.
FLAG_GRID = 257
RADIAL_BOUND_TOL = 1e-9
_POLE_STENCIL_H = 1e-4  # times length, for the one-sided curvature limit


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolarPoint:
    """A point (r, theta) on a normalized surface, r in [0, pi].

    theta is reduced to [0, 2*pi); at the poles (r = 0 or pi) theta is
    meaningless and canonicalized to 0.
    """

    r: float
    theta: float = 0.0

    def __post_init__(self):
        r = float(self.r)
        theta = float(self.theta) % (2.0 * PI)
        if r < -POLE_SNAP_TOL or r > PI + POLE_SNAP_TOL:
            raise ValueError(f"radial coordinate {r} outside [0, pi]")
        if r <= POLE_SNAP_TOL:
            r, theta = 0.0, 0.0
        elif r >= PI - POLE_SNAP_TOL:
            r, theta = PI, 0.0
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)

    @property
    def is_pole(self) -> bool:
        return self.r == 0.0 or self.r == PI


# ---------------------------------------------------------------------------
# warping profile
# ---------------------------------------------------------------------------

class WarpingProfile:
    """The warping function f with derivatives on [0, pi].

    Attributes
    ----------
    length : float
        Half-meridian length L; always pi after normalization.
    raw_length : float
        Pre-normalization half-meridian length.
    f, f1, f2 : callables
        The profile and its first two derivatives, vectorized over numpy
        arrays.
    pole_slope : float
        f'(0); +1 for a valid profile (f'(L) is then -1).
    curvature : callable or None
        Closed-form Gaussian curvature -f''/f extended continuously to
        the poles, when known analytically.
    """

    def __init__(self, f, f1, f2, *, curvature=None, raw_length=PI, name=""):
        self.length = PI
        self.raw_length = float(raw_length)
        self.f = f
        self.f1 = f1
        self.f2 = f2
        self.curvature = curvature
        self.name = name
        self._pole_curvature_cache: Optional[tuple] = None
        self._validate()
        self._precompute()

    # -- construction checks ------------------------------------------------

    def _validate(self):
        L = self.length
        f0 = float(self.f(0.0))
        fL = float(self.f(L))
        if abs(f0) > ENDPOINT_TOL or abs(fL) > ENDPOINT_TOL:
            raise InvalidProfileError(
                f"profile endpoints must vanish: f(0)={f0:.3e}, f(L)={fL:.3e}")
        s0 = float(self.f1(0.0))
        sL = float(self.f1(L))
        if abs(s0 - 1.0) > POLE_SLOPE_TOL or abs(sL + 1.0) > POLE_SLOPE_TOL:
            raise InvalidProfileError(
                f"pole slopes must be +1/-1: f'(0)={s0:.12f}, f'(L)={sL:.12f}")
        r = np.linspace(0.0, L, VALIDATION_GRID)
        vals = np.asarray(self.f(r[1:-1]))
        if np.any(vals <= 0.0):
            bad = r[1:-1][np.argmin(vals)]
            raise InvalidProfileError(
                f"profile must be positive on the interior; f({bad:.6f}) <= 0")
        # spot-check derivative consistency so a mismatched (f, f1, f2)
        # triple fails fast; the full O(h^2) check lives in the tests
        h = 1e-5
        probe = np.linspace(0.2, L - 0.2, 7)
        d1 = (np.asarray(self.f(probe + h)) - np.asarray(self.f(probe - h))) / (2 * h)
        if np.max(np.abs(d1 - np.asarray(self.f1(probe)))) > 1e-4:
            raise InvalidProfileError("f1 is inconsistent with finite differences of f")
        d2 = (np.asarray(self.f(probe + h)) - 2 * np.asarray(self.f(probe))
              + np.asarray(self.f(probe - h))) / h**2
        if np.max(np.abs(d2 - np.asarray(self.f2(probe)))) > 1e-2:
            raise InvalidProfileError("f2 is inconsistent with finite differences of f")
        self.pole_slope = 1.0

    def _precompute(self):
        L = self.length
        r = np.linspace(0.0, L, VALIDATION_GRID)
        fr = np.asarray(self.f(r))
        self._grid_r = r
        self._grid_f = fr
        # critical radii: interior sign changes of f'
        d = np.asarray(self.f1(r))
        crit = []
        for i in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0):
            crit.append(brentq(lambda x: float(self.f1(x)), r[i], r[i + 1],
                               xtol=1e-14))
        self.critical_radii = np.array(crit)
        if len(crit) == 0:
            raise InvalidProfileError("profile has no interior maximum")
        fc = np.asarray(self.f(self.critical_radii))
        k = int(np.argmax(fc))
        self.r_max = float(self.critical_radii[k])
        self.f_max = float(fc[k])
        self.is_unimodal = len(crit) == 1
        self._build_fast_tables()

    def _build_fast_tables(self):
        """Uniform piecewise-polynomial tables for the compiled kernels."""
        def table(fn, pin):
            if isinstance(fn, PPoly):
                br = fn.x
                widths = np.diff(br)
                if (abs(br[0]) < 1e-15 and abs(br[-1] - PI) < 1e-12
                        and np.allclose(widths, widths[0], rtol=1e-12)):
                    return np.ascontiguousarray(fn.c, dtype=float), widths[0]
            pp = _fast_ppoly(fn, pin_ends=pin)
            return np.ascontiguousarray(pp.c, dtype=float), pp.x[1] - pp.x[0]

        self._fast_f, self._fast_width = table(self.f, (0.0, 0.0))
        self._fast_f1, _ = table(self.f1, (self.f1(0.0), self.f1(PI)))
        self._fast_f2, _ = table(self.f2, None)

    # -- curvature ----------------------------------------------------------

    def curvature_at(self, r):
        """Gaussian curvature -f''/f, with one-sided limits at the poles."""
        if self.curvature is not None:
            return self.curvature(r)
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        at0 = r <= POLE_SNAP_TOL
        atL = r >= self.length - POLE_SNAP_TOL
        mid = ~(at0 | atL)
        if np.any(mid):
            out[mid] = -np.asarray(self.f2(r[mid])) / np.asarray(self.f(r[mid]))
        if np.any(at0) or np.any(atL):
            g0, gL = self._pole_curvature()
            out[at0] = g0
            out[atL] = gL
        return float(out[0]) if scalar else out

    def _pole_curvature(self):
        # limit of -f''/f at a pole is -f'''/f'; one-sided 4th-order stencil
        if self._pole_curvature_cache is None:
            h = _POLE_STENCIL_H * self.length
            w = _third_derivative_weights() / h**3
            k = np.arange(7)
            d3_0 = float(w @ np.asarray(self.f(k * h)))
            d3_L = -float(w @ np.asarray(self.f(self.length - k * h)))
            g0 = -d3_0 / float(self.f1(0.0))
            gL = -d3_L / float(self.f1(self.length))
            self._pole_curvature_cache = (g0, gL)
        return self._pole_curvature_cache


def _third_derivative_weights():
    # one-sided weights for f''' on nodes {0, 1, ..., 6} * h, order 4
    k = np.arange(7, dtype=float)
    A = np.vander(k, 7, increasing=True).T
    b = np.zeros(7)
    b[3] = 6.0
    return np.linalg.solve(A, b)


# ---------------------------------------------------------------------------
# surface model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceModel:
    """A normalized two-sphere of revolution plus measured model properties.

    The flags record what was measured at construction, they are never
    assumed: ``reflective_symmetric`` is equatorial mirror symmetry of f,
    ``curvature_monotone`` is strict decrease of the Gaussian curvature
    from the pole to the equator (ties count as violations, so a round
    sphere measures False), and ``cutlocus_assumption_checked`` records
    the prerequisites for the opposite-half-meridian cut-locus structure
    (mirror symmetry plus non-increasing curvature, ties allowed).
    """

    profile: WarpingProfile
    name: str
    reflective_symmetric: bool
    curvature_monotone: bool
    cutlocus_assumption_checked: bool

    @property
    def pole_p(self) -> PolarPoint:
        return PolarPoint(0.0, 0.0)

    @property
    def pole_q(self) -> PolarPoint:
        return PolarPoint(PI, 0.0)


def _build_model(profile: WarpingProfile, name: str) -> SurfaceModel:
    L = profile.length
    r = profile._grid_r
    sym = float(np.max(np.abs(np.asarray(profile.f(L - r)) - profile._grid_f)))
    reflective = sym <= SYMMETRY_TOL

    half = np.linspace(0.0, L / 2.0, FLAG_GRID)
    G = np.asarray(profile.curvature_at(half))
    dG = np.diff(G)
    strictly_decreasing = bool(np.all(dG < 0.0))
    nonincreasing = bool(np.all(dG <= SYMMETRY_TOL * np.maximum(1.0, np.abs(G[:-1]))))

    return SurfaceModel(
        profile=profile,
        name=name,
        reflective_symmetric=reflective,
        curvature_monotone=strictly_decreasing,
        cutlocus_assumption_checked=reflective and nonincreasing,
    )


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------

def make_unit_sphere() -> SurfaceModel:
    """The round unit sphere: f = sin, curvature identically 1."""
    profile = WarpingProfile(
        f=np.sin,
        f1=np.cos,
        f2=lambda r: -np.sin(r),
        curvature=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        raw_length=PI,
        name="unit-sphere",
    )
    return _build_model(profile, "unit-sphere")


def _fast_ppoly(fn, n_seg: int = 2048, deg: int = 6,
                pin_ends=None) -> PPoly:
    """Piecewise-Chebyshev tabulation of an analytic function on [0, pi].

    Local low-degree fits on short uniform segments reproduce the smooth
    profile functions to near machine accuracy while evaluating at C
    speed (the degree stays small because the Chebyshev-to-power
    conversion loses a digit per couple of degrees).
    The node-values-to-power-coefficients map is one shared matrix, so
    the slow closed-form callable is sampled exactly once, in a single
    vectorized call.  ``pin_ends=(v0, vL)`` nudges the endpoint
    segments' constant terms so the tabulation hits exact end values.
    """
    breaks = np.linspace(0.0, PI, n_seg + 1)
    width = breaks[1] - breaks[0]
    k = deg + 1
    xj = np.cos((2.0 * np.arange(k) + 1.0) * PI / (2.0 * k))  # cheb nodes

    # interpolate in the unit-interval variable tau = (r - start)/width,
    # where the low-degree Vandermonde solve is machine accurate, then
    # rescale rows to the PPoly local variable (an exact operation)
    tau = (xj + 1.0) / 2.0
    V = np.vander(tau, k, increasing=True)
    nodes = breaks[:-1, None] + (xj[None, :] + 1.0) * (width / 2.0)
    vals = np.asarray(fn(nodes.ravel())).reshape(n_seg, k)
    c_tau = np.linalg.solve(V, vals.T)                    # (k, n_seg)
    coeffs = (c_tau / width ** np.arange(k)[:, None])[::-1].copy()

    pp = PPoly(coeffs, breaks, extrapolate=True)
    if pin_ends is not None:
        v0, vL = pin_ends
        if v0 is not None:
            coeffs[-1, 0] += v0 - pp(0.0)
        if vL is not None:
            coeffs[-1, -1] += vL - pp(PI)
        pp = PPoly(coeffs, breaks, extrapolate=True)
    return pp


def make_prolate_ellipsoid(a: float, b: float) -> SurfaceModel:
    """Surface of revolution of the ellipse x = a*sin(u), z = b*cos(u), a < b.

    The meridian is reparametrized by arclength (Chebyshev-integrated to
    machine accuracy) and the whole metric rescaled so the half meridian
    has length pi.  The rescaling multiplies lengths by pi/raw_length and
    Gaussian curvature by (raw_length/pi)^2.
    """
    a = float(a)
    b = float(b)
    if not (0.0 < a < b):
        raise InvalidProfileError(
            f"prolate ellipsoid needs 0 < a < b, got a={a}, b={b}")

    c2 = b * b - a * a

    def gsq(u):
        s = np.sin(u)
        return a * a + c2 * s * s

    def g(u):
        return np.sqrt(gsq(u))

    # arclength s(u) = int_0^u g, as a Chebyshev antiderivative on [0, pi]
    def g_cheb_arg(x):
        return g((np.asarray(x) + 1.0) * (PI / 2.0))

    for deg in (32, 64, 96, 128, 192, 256):
        series = _cheb.chebinterpolate(g_cheb_arg, deg)
        if np.max(np.abs(series[-4:])) < 1e-15 * np.max(np.abs(series)):
            break
    s_series = _cheb.chebint(series, lbnd=-1.0) * (PI / 2.0)

    def s_of_u(u):
        return _cheb.chebval(np.asarray(u) * (2.0 / PI) - 1.0, s_series)

    raw_length = float(s_of_u(PI))
    lam = PI / raw_length

    u_tab = np.linspace(0.0, PI, 8193)
    s_tab = np.asarray(s_of_u(u_tab))

    def u_of_r(r):
        s_t = np.clip(np.asarray(r, dtype=float) / lam, 0.0, raw_length)
        u = np.interp(s_t, s_tab, u_tab)
        for _ in range(4):
            u = np.clip(u - (s_of_u(u) - s_t) / g(u), 0.0, PI)
        return u

    def f_exact(r):
        return lam * a * np.sin(u_of_r(r))

    def f1_exact(r):
        u = u_of_r(r)
        return a * np.cos(u) / g(u)

    def f2_exact(r):
        u = u_of_r(r)
        gu = g(u)
        gp = c2 * np.sin(u) * np.cos(u) / gu
        return -a * (np.sin(u) * gu + np.cos(u) * gp) / (lam * gu**3)

    def curvature_exact(r):
        u = u_of_r(r)
        return (b * b) / (gsq(u) ** 2 * lam * lam)

    # the closed forms invert s(u) per call, far too slow for the
    # quadrature-node volumes of the distance engine; tabulate them at
    # machine accuracy instead (endpoints pinned to the exact values)
    f = _fast_ppoly(f_exact, pin_ends=(0.0, 0.0))
    f1 = _fast_ppoly(f1_exact, pin_ends=(1.0, -1.0))
    f2 = _fast_ppoly(f2_exact, pin_ends=(0.0, 0.0))
    curvature = _fast_ppoly(curvature_exact)

    profile = WarpingProfile(
        f=f, f1=f1, f2=f2, curvature=curvature,
        raw_length=raw_length, name=f"prolate-ellipsoid({a},{b})")
    return _build_model(profile, f"prolate-ellipsoid({a},{b})")


def make_custom(samples) -> SurfaceModel:
    """Build a surface from (r, f) samples of a warping function.

    The samples must start at r = 0, increase strictly in r, vanish at
    both endpoints and be positive in between, with endpoint secants
    consistent with unit pole slopes.  A clamped C^2 cubic spline (end
    slopes +1/-1) interpolates the normalized data; validation flags are
    measured from the spline, never assumed.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 8:
        raise InvalidProfileError("need at least 8 (r, f) sample pairs")
    r, v = pts[:, 0], pts[:, 1]
    if np.any(np.diff(r) <= 0.0):
        raise InvalidProfileError("sample radii must be strictly increasing")
    if abs(r[0]) > POLE_SNAP_TOL:
        raise InvalidProfileError("samples must start at r = 0")
    if abs(v[0]) > POLE_SLOPE_TOL or abs(v[-1]) > POLE_SLOPE_TOL:
        raise InvalidProfileError(
            f"endpoint samples must vanish: f(0)={v[0]:.3e}, f(L)={v[-1]:.3e}")
    if np.any(v[1:-1] <= 0.0):
        raise InvalidProfileError("interior samples must be positive")
    # endpoint secants should look like unit slopes at the sample spacing
    sec0 = (v[1] - v[0]) / (r[1] - r[0])
    secL = (v[-1] - v[-2]) / (r[-1] - r[-2])
    tol0 = max(0.02, 5.0 * (r[1] - r[0]))
    tolL = max(0.02, 5.0 * (r[-1] - r[-2]))
    if abs(sec0 - 1.0) > tol0 or abs(secL + 1.0) > tolL:
        raise InvalidProfileError(
            f"endpoint secants {sec0:.4f}, {secL:.4f} are inconsistent "
            "with unit pole slopes")

    lam = PI / r[-1]
    spline = CubicSpline(r * lam, v * lam, bc_type=((1, 1.0), (1, -1.0)))
    profile = WarpingProfile(
        f=spline, f1=spline.derivative(1), f2=spline.derivative(2),
        curvature=None, raw_length=float(r[-1]), name="custom")
    return _build_model(profile, "custom")


# ---------------------------------------------------------------------------
# curvature queries and the radial lower-bound hypothesis
# ---------------------------------------------------------------------------

def gaussian_curvature(surface: SurfaceModel, r):
    """Gaussian curvature -f''(r)/f(r), with one-sided limits at the poles."""
    return surface.profile.curvature_at(r)


@dataclass(frozen=True)
class RadialBoundReport:
    """Result of the pointwise curvature comparison G_M - G_Mtilde."""

    margin: float
    argmin_r: float
    holds: bool
    grid_size: int


def check_radial_bound(M: SurfaceModel, Mtilde: SurfaceModel,
                       grid_size: int = 2001) -> RadialBoundReport:
    """Minimum of G_M(r) - G_Mtilde(r) over a grid of [0, pi].

    The lower-bound hypothesis of the comparison machinery holds iff the
    margin is >= -1e-9.  Both surfaces are normalized at construction, so
    the comparison is at matched meridian distance.
    """
    r = np.linspace(0.0, PI, grid_size)
    diff = (np.asarray(gaussian_curvature(M, r))
            - np.asarray(gaussian_curvature(Mtilde, r)))
    k = int(np.argmin(diff))
    margin = float(diff[k])
    return RadialBoundReport(margin=margin, argmin_r=float(r[k]),
                             holds=margin >= -RADIAL_BOUND_TOL,
                             grid_size=grid_size)
