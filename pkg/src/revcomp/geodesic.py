"""Unit-speed geodesics on a surface of revolution.

Geodesics are integrated in coordinates (r, theta, phi) where phi is the
angle from the outward meridian direction, kept in [0, pi] so that theta
is non-decreasing along the curve (the mirror image theta -> -theta of
any geodesic is again a geodesic; callers that need the clockwise copy
apply the reflection themselves).  The quantity nu = f(r) * sin(phi) is
conserved along geodesics and is carried as a first-class diagnostic:
the integrator never projects onto it, so measured drift is a genuine
error signal.

Meridians (phi = 0 or pi within a small alignment tolerance) are treated
analytically: r(s) is a sawtooth between the poles, theta jumps by pi at
each pole passage, and the coordinate singularity never enters the ODE.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError
from .surface import PI, PolarPoint, SurfaceModel

# Alignment tolerance for treating a shot as an exact meridian; below it
# the trajectory cannot be distinguished from a meridian at integration
# accuracy, and the pole passage is continued analytically.
MERIDIAN_PHI_TOL = 1e-6

RTOL = 1e-10
ATOL = 1e-12
MAX_STEP_FRACTION = 0.01  # of the half-meridian length

DEFAULT_SAMPLES = 129


@dataclass(frozen=True)
class GeodesicState:
    """Pointwise state along a geodesic."""

    r: float
    theta: float
    phi: float
    nu: float


class GeodesicSegment:
    """A sampled unit-speed geodesic of fixed length.

    ``samples`` is an ordered list of (s, GeodesicState); ``state_at``
    evaluates the underlying dense solution (or the closed form for
    meridians) at any arclength in [0, length].  theta values are
    unwrapped (monotone, not reduced mod 2*pi) so swept angle is
    directly readable.
    """

    def __init__(self, surface, start, phi0, length, kind, s_samples,
                 states, pole_crossings, dense=None, meridian_data=None):
        self.surface = surface
        self.start = start
        self.phi0 = float(phi0)
        self.length = float(length)
        self.samples: List[Tuple[float, GeodesicState]] = list(zip(s_samples, states))
        self.pole_crossings: List[float] = list(pole_crossings)
        self.nu0 = states[0].nu if states else 0.0
        self._kind = kind
        self._dense = dense
        self._meridian_data = meridian_data

    def state_at(self, s: float) -> GeodesicState:
        if self._kind == "meridian":
            return _meridian_state(self.surface, self._meridian_data, s)
        if s < -1e-12 or s > self.length + 1e-9:
            raise ValueError(f"arclength {s} outside [0, {self.length}]")
        s = min(max(s, 0.0), self.length)
        r, theta, phi = self._dense(s)
        f = float(self.surface.profile.f(r))
        return GeodesicState(float(r), float(theta), float(phi), f * np.sin(phi))

    def point_at(self, s: float) -> PolarPoint:
        st = self.state_at(s)
        return PolarPoint(min(max(st.r, 0.0), PI), st.theta)

    def endpoint(self) -> PolarPoint:
        return self.point_at(self.length)

    def tangent_at(self, s: float) -> Tuple[float, float]:
        """Unit tangent components (radial, circumferential) at s."""
        st = self.state_at(s)
        return float(np.cos(st.phi)), float(np.sin(st.phi))

    def max_nu_drift(self) -> float:
        """Largest Clairaut-constant drift per unit arclength over samples."""
        worst = 0.0
        for s, st in self.samples[1:]:
            worst = max(worst, abs(st.nu - self.nu0) / max(s, 1e-3))
        return worst

    def max_ode_residual(self) -> float:
        """Consistency of consecutive samples with the geodesic equations.

        Each increment is compared against Simpson quadrature of the
        right-hand side evaluated on the dense solution, so the number
        measures integration error rather than sampling resolution.
        """
        if self._kind == "meridian":
            return 0.0
        f = self.surface.profile.f
        f1 = self.surface.profile.f1
        worst = 0.0
        for (s0, st0), (s1, st1) in zip(self.samples[:-1], self.samples[1:]):
            ds = s1 - s0
            if ds <= 0:
                continue
            mid = self.state_at(0.5 * (s0 + s1))
            states = (st0, mid, st1)
            wts = (1.0, 4.0, 1.0)
            rr = sum(w * np.cos(st.phi) for w, st in zip(wts, states)) * ds / 6.0
            tt = sum(w * np.sin(st.phi) / float(f(st.r))
                     for w, st in zip(wts, states)) * ds / 6.0
            pp = sum(-w * float(f1(st.r)) / float(f(st.r)) * np.sin(st.phi)
                     for w, st in zip(wts, states)) * ds / 6.0
            worst = max(worst,
                        abs(st1.r - st0.r - rr) / ds,
                        abs(st1.theta - st0.theta - tt) / ds,
                        abs(st1.phi - st0.phi - pp) / ds)
        return worst


# ---------------------------------------------------------------------------
# meridians (analytic)
# ---------------------------------------------------------------------------

def _meridian_state(surface, data, s):
    """State at arclength s of a meridian, continued through the poles.

    The unfolded coordinate x = x0 + dir*s lives on the universal cover;
    folding x mod 2*pi into [0, pi] gives r, and the fold parity selects
    between theta0 and theta0 + pi.
    """
    x0, direction, theta0 = data
    x = np.mod(x0 + direction * s, 2.0 * PI)
    if x <= PI:
        r, theta, up = x, theta0, 1.0
    else:
        r, theta, up = 2.0 * PI - x, theta0 + PI, -1.0
    dr_ds = direction * up
    phi = 0.0 if dr_ds > 0 else PI
    if r <= 1e-15:
        r = 0.0
    if r >= PI - 1e-15:
        r = PI
    return GeodesicState(float(r), float(theta % (2.0 * PI)), phi, 0.0)


def _meridian_segment(surface, start, phi0, length, n_samples):
    direction = 1.0 if phi0 <= PI / 2.0 else -1.0
    if start.is_pole:
        # from a pole every direction is outward along some meridian
        x0 = 0.0 if start.r == 0.0 else PI
        direction = 1.0 if start.r == 0.0 else -1.0
        theta0 = phi0  # interpreted as the meridian angle, see shoot()
    else:
        x0, theta0 = start.r, start.theta
    data = (x0, direction, theta0)
    s_vals = np.linspace(0.0, length, n_samples)
    states = [_meridian_state(surface, data, s) for s in s_vals]
    # pole passages: solutions of x0 + dir*s = k*pi in (0, length)
    crossings = []
    k0 = int(np.floor((x0 if direction > 0 else x0 - length) / PI)) - 1
    k1 = int(np.ceil((x0 + length if direction > 0 else x0) / PI)) + 1
    for k in range(k0, k1 + 1):
        s = (k * PI - x0) / direction
        if 1e-12 < s < length - 1e-12:
            crossings.append(s)
    return GeodesicSegment(surface, start, phi0, length, "meridian",
                           s_vals, states, sorted(crossings),
                           meridian_data=data)


def meridian(surface: SurfaceModel, alpha: float,
             length: float = 2.0 * PI, n_samples: int = DEFAULT_SAMPLES):
    """The unit-speed meridian from the pole r = 0 with theta = alpha.

    It reaches the opposite pole at arclength pi and closes up with
    period 2*pi (meridians are periodic geodesics of length twice the
    pole distance).
    """
    start = PolarPoint(0.0, 0.0)
    seg = _meridian_segment(surface, start, float(alpha) % (2.0 * PI),
                            length, n_samples)
    return seg


def parallel(surface: SurfaceModel, c: float, theta: float) -> PolarPoint:
    """The point sigma_c(theta) = (c, theta) of the coordinate circle r = c.

    Parallels are coordinate curves, not geodesics in general; c must be
    strictly between the poles.
    """
    if not (0.0 < c < PI):
        raise ValueError(f"parallel radius must lie in (0, pi), got {c}")
    return PolarPoint(c, theta)


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

def shoot(surface: SurfaceModel, start: PolarPoint, phi0: float,
          length: float, n_samples: int = DEFAULT_SAMPLES) -> GeodesicSegment:
    """Integrate the unit-speed geodesic from ``start`` with angle ``phi0``.

    phi0 in [0, pi] is measured from the outward meridian direction;
    theta is non-decreasing along the returned curve.  Shots aligned
    with a meridian within 1e-6 are continued analytically through the
    poles.  From a pole itself phi0 is interpreted as the meridian angle
    alpha (all directions there are meridional).

    Raises IntegrationError if the integrator stalls (possible only for
    nearly-meridional shots squeezing past a pole).
    """
    if length <= 0.0:
        raise ValueError("length must be positive")
    phi0 = float(phi0)
    if not (-1e-12 <= phi0 <= PI + 1e-12):
        raise ValueError(f"phi0 must lie in [0, pi], got {phi0}")
    phi0 = min(max(phi0, 0.0), PI)

    if start.is_pole or min(phi0, PI - phi0) <= MERIDIAN_PHI_TOL:
        return _meridian_segment(surface, start, phi0, length, n_samples)

    prof = surface.profile
    f, f1 = prof.f, prof.f1

    def rhs(s, y):
        r, theta, phi = y
        fr = float(f(r))
        sphi = np.sin(phi)
        return (np.cos(phi), sphi / fr, -float(f1(r)) / fr * sphi)

    y0 = (start.r, start.theta, phi0)
    sol = solve_ivp(rhs, (0.0, length), y0, method="DOP853",
                    rtol=RTOL, atol=ATOL, max_step=MAX_STEP_FRACTION * PI,
                    dense_output=True)
    if not sol.success:
        raise IntegrationError(
            f"geodesic integration stalled: {sol.message}",
            s_reached=float(sol.t[-1]), state=tuple(sol.y[:, -1]),
            nu=float(f(start.r)) * np.sin(phi0))

    dense = lambda s: sol.sol(s)
    s_vals = np.linspace(0.0, length, n_samples)
    states = []
    for s in s_vals:
        r, theta, phi = sol.sol(s)
        states.append(GeodesicState(float(r), float(theta), float(phi),
                                    float(f(r)) * np.sin(phi)))
    return GeodesicSegment(surface, start, phi0, length, "ode",
                           s_vals, states, [], dense=dense)


def unit_speed_defect(segment: GeodesicSegment, n_probe: int = 33) -> float:
    """Measured deviation from unit speed along the segment.

    Velocities are taken by central differences of the dense solution,
    not from the ODE right-hand side, so the number reflects the actual
    integrated path.
    """
    prof = segment.surface.profile
    h = 1e-6
    worst = 0.0
    for s in np.linspace(h, segment.length - h, n_probe):
        a = segment.state_at(s - h)
        b = segment.state_at(s + h)
        mid = segment.state_at(s)
        if segment._kind == "meridian" and _near_pole_between(a, b):
            continue  # sawtooth corner: one-sided speeds are still unit
        dr = (b.r - a.r) / (2 * h)
        dth = (b.theta - a.theta) / (2 * h)
        speed2 = dr * dr + float(prof.f(mid.r)) ** 2 * dth * dth
        worst = max(worst, abs(speed2 - 1.0))
    return worst


def _near_pole_between(a, b):
    return (a.r < 1e-5 or a.r > PI - 1e-5 or b.r < 1e-5 or b.r > PI - 1e-5
            or abs(b.theta - a.theta) > 1.0)


# ---------------------------------------------------------------------------
# Jacobi fields and conjugate points
# ---------------------------------------------------------------------------

@dataclass
class JacobiSolution:
    """Scalar Jacobi field J along a geodesic with J(0)=0, J'(0)=1."""

    geodesic: GeodesicSegment
    first_conjugate: Optional[float]
    s_samples: np.ndarray
    j_samples: np.ndarray
    jp_samples: np.ndarray


def first_conjugate(surface: SurfaceModel, start: PolarPoint, phi0: float,
                    horizon: float = 4.0 * PI) -> JacobiSolution:
    """First zero of the Jacobi field along the shot geodesic.

    Solves J'' + G(r(s)) J = 0 together with the geodesic; the zero is
    located by the integrator's event root-finding (sign change plus
    bisection refinement).  Returns None for the conjugate arclength if
    J stays positive up to the horizon.
    """
    if horizon > 4.0 * PI + 1e-9:
        raise ValueError("horizon must not exceed 4*pi")
    prof = surface.profile
    geo = shoot(surface, start, phi0, horizon)

    if geo._kind == "meridian":
        data = geo._meridian_data

        def rhs(s, y):
            r = _meridian_state(surface, data, s).r
            return (y[1], -float(prof.curvature_at(r)) * y[0])
    else:
        f, f1 = prof.f, prof.f1

        def rhs(s, y):
            r, theta, phi, J, Jp = y
            fr = float(f(r))
            sphi = np.sin(phi)
            return (np.cos(phi), sphi / fr, -float(f1(r)) / fr * sphi,
                    Jp, -float(prof.curvature_at(r)) * J)

    def j_zero(s, y):
        return y[-2]

    j_zero.terminal = True
    j_zero.direction = -1

    if geo._kind == "meridian":
        y0 = (0.0, 1.0)
    else:
        y0 = (start.r, start.theta, phi0, 0.0, 1.0)
    sol = solve_ivp(rhs, (0.0, horizon), y0, method="DOP853",
                    rtol=RTOL, atol=ATOL, max_step=MAX_STEP_FRACTION * PI,
                    dense_output=True, events=j_zero)
    if not sol.success:
        raise IntegrationError(f"Jacobi integration failed: {sol.message}",
                               s_reached=float(sol.t[-1]))

    conj = None
    if sol.t_events[0].size:
        conj = float(sol.t_events[0][0])

    s_end = conj if conj is not None else horizon
    s_vals = np.linspace(0.0, s_end, 257)
    dense_vals = sol.sol(s_vals)
    return JacobiSolution(geodesic=geo, first_conjugate=conj,
                          s_samples=s_vals,
                          j_samples=dense_vals[-2],
                          jp_samples=dense_vals[-1])
