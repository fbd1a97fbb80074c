"""Clairaut-reduced evaluation of shot geodesic families (internal).

A unit-speed geodesic with Clairaut constant nu = f(r0) sin(phi0) > 0 is
confined to the band [rm, rp] where f >= nu, and r is monotone between
consecutive turning radii.  Arclength and swept angle accumulated over a
monotone leg are integrals in r,

    s     = int f(r) / sqrt(f(r)^2 - nu^2) dr,
    theta = int nu / (f(r) sqrt(f(r)^2 - nu^2)) dr,

with inverse-square-root singularities at the turning radii.  Writing
f^2 - nu^2 = (r - rm)(rp - r) w(r) with w smooth and positive, the
substitutions r = m - h cos(xi) (full leg) and r = r_t -/+ (..) t^2
(half-open legs anchored at one turning point) remove the singularities
exactly, so fixed Gauss-Legendre rules converge at machine accuracy for
analytic profiles.

Everything here is vectorized over a trailing axis of initial angles so
that a full candidate sweep costs a handful of numpy passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ._kernels import legs_kernel, turning_kernel
from .surface import PI, WarpingProfile

N_NODES = 48
_GL_X, _GL_W = np.polynomial.legendre.leggauss(N_NODES)
# nodes/weights on [0, 1], mapped per leg piece
_T_NODES = np.ascontiguousarray(0.5 * (_GL_X + 1.0))
_T_WEIGHTS = np.ascontiguousarray(0.5 * _GL_W)

N_SLOTS = 4              # scheduled parallel crossings computed per shot
PHI_GRID_HALF = 360      # sweep directions per half grid (720 total)
# The grid hugs the meridian directions closely: connections at angular
# separations down to ~1e-9 (the comparison-angle bracket floor) are
# bracketed between the edge direction and the exact meridian.
PHI_EPS = 3e-10
REFINE_THETA_TOL = 1e-10
REFINE_MAX_ITER = 200
DEGENERATE_BAND = 1e-9


# ---------------------------------------------------------------------------
# turning radii
# ---------------------------------------------------------------------------

class _TurningSolver:
    """Band-local turning radii rm <= r0 <= rp with f(rm) = f(rp) = nu."""

    def __init__(self, profile: WarpingProfile, r0: float):
        self.profile = profile
        self.r0 = float(r0)
        if not profile.is_unimodal:
            # coarse grid for bracketing the band around r0
            self._rc = profile._grid_r[::8].copy()
            self._fc = profile._grid_f[::8].copy()
            self._i0 = int(np.searchsorted(self._rc, self.r0))

    def __call__(self, nu):
        nu = np.asarray(nu, dtype=float)
        prof = self.profile
        cap = prof.f_max * (1.0 - 1e-15)
        nu = np.minimum(nu, cap)
        cf, cf1, w = prof._fast_f, prof._fast_f1, prof._fast_width
        if prof.is_unimodal:
            rm = turning_kernel(cf, cf1, w, nu, np.zeros_like(nu),
                                np.full_like(nu, prof.r_max), True)
            rp = turning_kernel(cf, cf1, w, nu, np.full_like(nu, prof.r_max),
                                np.full_like(nu, prof.length), False)
            return rm, rp
        rc, fc, i0 = self._rc, self._fc, self._i0
        below_lo = fc[None, :i0] <= nu[:, None]
        j_lo = i0 - 1 - np.argmax(below_lo[:, ::-1], axis=1)
        below_hi = fc[None, i0:] <= nu[:, None]
        j_hi = i0 + np.argmax(below_hi, axis=1)
        rm = turning_kernel(cf, cf1, w, nu, rc[j_lo],
                            rc[np.minimum(j_lo + 1, len(rc) - 1)], True)
        rp = turning_kernel(cf, cf1, w, nu, rc[np.maximum(j_hi - 1, 0)],
                            rc[j_hi], False)
        return rm, rp


# ---------------------------------------------------------------------------
# regularized leg integrals
# ---------------------------------------------------------------------------
# The quadrature itself lives in _kernels.legs_kernel: legs are
# parametrized by r = m - h*cos(xi), which absorbs the inverse-square-
# root turning-point singularities exactly, with the turning offsets
# computed in substitution-native form and a Taylor guard within 1e-6
# of the turning radii (where f - nu would cancel catastrophically).


def _xi_of(r, rm, rp):
    """Leg angle of radius r: xi = arccos((m - r)/h), clipped into [0, pi]."""
    h = np.maximum(0.5 * (rp - rm), 1e-300)
    m = 0.5 * (rp + rm)
    return np.arccos(np.clip((m - r) / h, -1.0, 1.0))


def _legs_batched(profile, nu, rm, rp, los, his):
    """Leg integrals of shape (n, L), pole cascades handled in-kernel."""
    return legs_kernel(profile._fast_f, profile._fast_f1, profile._fast_f2,
                       profile._fast_width, profile.length, nu, rm, rp,
                       np.ascontiguousarray(los), np.ascontiguousarray(his),
                       _T_NODES, _T_WEIGHTS)


# ---------------------------------------------------------------------------
# scheduled parallel crossings
# ---------------------------------------------------------------------------

@dataclass
class CrossingCurves:
    """Per-direction crossing data against the target parallel."""

    phi0: np.ndarray          # initial angles
    nu: np.ndarray
    s: np.ndarray             # (n, N_SLOTS) arclength at crossing
    theta: np.ndarray         # (n, N_SLOTS) swept angle at crossing
    down: np.ndarray          # (n, N_SLOTS) True if r decreasing there
    valid: np.ndarray         # (n, N_SLOTS)


@dataclass
class DirectionFan:
    """Target-independent data for a fan of directions from one radius.

    Everything here depends only on (profile, r0, phi0): the Clairaut
    constants, turning radii, pole-layer boundaries and the legs anchored
    at r0.  Repeated distance queries from a fixed point (cut-locus
    bisections above all) reuse one fan across all target parallels.
    """

    phi0: np.ndarray
    nu: np.ndarray
    rm: np.ndarray
    rp: np.ndarray
    xi_0: np.ndarray
    s_full: np.ndarray
    t_full: np.ndarray
    s_lo_0: np.ndarray
    t_lo_0: np.ndarray
    s_hi_0: np.ndarray
    t_hi_0: np.ndarray


class ParallelCrossings:
    """Crossings of geodesics from radius r0 with the parallel r = ry.

    The crossing schedule is closed-form in a handful of regularized leg
    integrals: the partial first leg from r0 to the first turning point,
    the repeated full leg, and the offsets of ry within a leg.  The k-th
    scheduled crossing is therefore a smooth function of phi0 wherever
    it exists, which is what makes bracketed refinement reliable.
    """

    def __init__(self, profile: WarpingProfile, r0: float, ry: float):
        self.profile = profile
        self.r0 = float(r0)
        self.ry = float(ry)
        self.f_r0 = float(profile.f(self.r0))
        self._turning = _TurningSolver(profile, self.r0)

    def make_fan(self, phi0) -> DirectionFan:
        """Precompute the target-independent half of ``curves``."""
        phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
        prof = self.profile
        nu = self.f_r0 * np.sin(phi0)
        rm, rp = self._turning(nu)
        zeros = np.zeros_like(rm)
        pis = np.full_like(rm, PI)
        xi_0 = _xi_of(np.clip(self.r0, rm, rp), rm, rp)
        los = np.stack([zeros, zeros, xi_0], axis=1)
        his = np.stack([pis, xi_0, pis], axis=1)
        s_legs, t_legs = _legs_batched(prof, nu, rm, rp, los, his)
        return DirectionFan(phi0=phi0, nu=nu, rm=rm, rp=rp, xi_0=xi_0,
                            s_full=s_legs[:, 0], t_full=t_legs[:, 0],
                            s_lo_0=s_legs[:, 1], t_lo_0=t_legs[:, 1],
                            s_hi_0=s_legs[:, 2], t_hi_0=t_legs[:, 2])

    def curves(self, phi0=None, fan: DirectionFan = None) -> CrossingCurves:
        prof = self.profile
        r0, ry = self.r0, self.ry
        if fan is not None:
            # target-independent legs were precomputed; only the three
            # legs against the target parallel remain: [rm,ry], [ry,rp]
            # and the direct first-leg crossing piece (differencing two
            # turning-anchored integrals would cancel catastrophically
            # across a pole pass)
            phi0, nu, rm, rp = fan.phi0, fan.nu, fan.rm, fan.rp
            xi_0 = fan.xi_0
            xi_y = _xi_of(np.clip(ry, rm, rp), rm, rp)
            zeros = np.zeros_like(rm)
            pis = np.full_like(rm, PI)
            los = np.stack([zeros, xi_y, np.minimum(xi_0, xi_y)], axis=1)
            his = np.stack([xi_y, pis, np.maximum(xi_0, xi_y)], axis=1)
            s_legs, t_legs = _legs_batched(prof, nu, rm, rp, los, his)
            s_lo_y, s_hi_y, s_dir = s_legs.T
            t_lo_y, t_hi_y, t_dir = t_legs.T
            s_full, t_full = fan.s_full, fan.t_full
            s_lo_0, t_lo_0 = fan.s_lo_0, fan.t_lo_0
            s_hi_0, t_hi_0 = fan.s_hi_0, fan.t_hi_0
        else:
            phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
            nu = self.f_r0 * np.sin(phi0)
            rm, rp = self._turning(nu)
            xi_0 = _xi_of(np.clip(r0, rm, rp), rm, rp)
            xi_y = _xi_of(np.clip(ry, rm, rp), rm, rp)
            zeros = np.zeros_like(rm)
            pis = np.full_like(rm, PI)
            los = np.stack([zeros, zeros, xi_y, zeros, xi_0,
                            np.minimum(xi_0, xi_y)], axis=1)
            his = np.stack([pis, xi_y, pis, xi_0, pis,
                            np.maximum(xi_0, xi_y)], axis=1)
            s_legs, t_legs = _legs_batched(prof, nu, rm, rp, los, his)
            s_full, s_lo_y, s_hi_y, s_lo_0, s_hi_0, s_dir = s_legs.T
            t_full, t_lo_y, t_hi_y, t_lo_0, t_hi_0, t_dir = t_legs.T

        band_ok = (rp - rm) > DEGENERATE_BAND
        in_band = (ry >= rm - 1e-12) & (ry <= rp + 1e-12) & band_ok

        n = phi0.size
        s = np.empty((n, N_SLOTS))
        th = np.empty((n, N_SLOTS))
        down = np.empty((n, N_SLOTS), dtype=bool)

        outward = phi0 < PI / 2.0
        if ry >= r0:
            # outward shots meet ry on the first leg
            s_out = np.stack([s_dir,
                              s_hi_0 + s_hi_y,
                              s_hi_0 + s_full + s_lo_y,
                              s_hi_0 + 2 * s_full + s_hi_y], axis=1)
            th_out = np.stack([t_dir,
                               t_hi_0 + t_hi_y,
                               t_hi_0 + t_full + t_lo_y,
                               t_hi_0 + 2 * t_full + t_hi_y], axis=1)
            down_out = np.array([False, True, False, True])
            s_in = np.stack([s_lo_0 + s_lo_y,
                             s_lo_0 + s_full + s_hi_y,
                             s_lo_0 + 2 * s_full + s_lo_y,
                             s_lo_0 + 3 * s_full + s_hi_y], axis=1)
            th_in = np.stack([t_lo_0 + t_lo_y,
                              t_lo_0 + t_full + t_hi_y,
                              t_lo_0 + 2 * t_full + t_lo_y,
                              t_lo_0 + 3 * t_full + t_hi_y], axis=1)
            down_in = np.array([False, True, False, True])
        else:
            # inward shots meet ry on the first leg
            s_in = np.stack([s_dir,
                             s_lo_0 + s_lo_y,
                             s_lo_0 + s_full + s_hi_y,
                             s_lo_0 + 2 * s_full + s_lo_y], axis=1)
            th_in = np.stack([t_dir,
                              t_lo_0 + t_lo_y,
                              t_lo_0 + t_full + t_hi_y,
                              t_lo_0 + 2 * t_full + t_lo_y], axis=1)
            down_in = np.array([True, False, True, False])
            s_out = np.stack([s_hi_0 + s_hi_y,
                              s_hi_0 + s_full + s_lo_y,
                              s_hi_0 + 2 * s_full + s_hi_y,
                              s_hi_0 + 3 * s_full + s_lo_y], axis=1)
            th_out = np.stack([t_hi_0 + t_hi_y,
                               t_hi_0 + t_full + t_lo_y,
                               t_hi_0 + 2 * t_full + t_hi_y,
                               t_hi_0 + 3 * t_full + t_lo_y], axis=1)
            down_out = np.array([True, False, True, False])

        mask = outward[:, None]
        s[:] = np.where(mask, s_out, s_in)
        th[:] = np.where(mask, th_out, th_in)
        down[:] = np.where(mask, down_out[None, :], down_in[None, :])
        valid = np.broadcast_to(in_band[:, None], (n, N_SLOTS)).copy()
        return CrossingCurves(phi0=phi0, nu=nu, s=s, theta=th,
                              down=down, valid=valid)


# ---------------------------------------------------------------------------
# bracketed refinement on the initial angle
# ---------------------------------------------------------------------------

@dataclass
class SweepCandidate:
    """A refined geodesic connection to the target parallel."""

    phi0: float
    length: float
    swept: float
    end_down: bool
    kind: str
    theta_residual: float = 0.0


def sweep_phi_grid() -> np.ndarray:
    """The 720-direction candidate grid, split at pi/2.

    The first leg of a shot flips between outward and inward across
    phi0 = pi/2, so crossing curves may jump there; keeping pi/2 out of
    every bracket preserves continuity within brackets.
    """
    lo = np.linspace(PHI_EPS, PI / 2.0 - 1e-9, PHI_GRID_HALF)
    hi = np.linspace(PI / 2.0 + 1e-9, PI - PHI_EPS, PHI_GRID_HALF)
    return np.concatenate([lo, hi])


def make_direction_fan(profile: WarpingProfile, r0: float,
                       phi0=None) -> DirectionFan:
    """Fan of sweep directions from radius r0, reusable across targets."""
    if phi0 is None:
        phi0 = sweep_phi_grid()
    return ParallelCrossings(profile, r0, r0).make_fan(phi0)


def merge_curves(a: CrossingCurves, b: CrossingCurves) -> CrossingCurves:
    """Concatenate two curve sets and re-sort by initial angle."""
    phi0 = np.concatenate([a.phi0, b.phi0])
    order = np.argsort(phi0)
    cat = lambda x, y: np.concatenate([x, y], axis=0)[order]
    return CrossingCurves(phi0=phi0[order], nu=cat(a.nu, b.nu),
                          s=cat(a.s, b.s), theta=cat(a.theta, b.theta),
                          down=cat(a.down, b.down),
                          valid=cat(a.valid, b.valid))


def refine_candidates(pc: ParallelCrossings, curves: CrossingCurves,
                      target: float, s_cap: float) -> List[SweepCandidate]:
    """Bisection on phi0 for every bracketed crossing with swept = target."""
    res = curves.theta - target
    phi = curves.phi0
    n = phi.size
    split = int(np.searchsorted(phi, PI / 2.0))

    lo_list, hi_list, slot_list = [], [], []
    for block in (slice(0, split), slice(split, n)):
        r = res[block]
        v = curves.valid[block]
        p = phi[block]
        sign_change = (r[:-1, :] * r[1:, :] < 0.0) & v[:-1, :] & v[1:, :]
        ii, kk = np.nonzero(sign_change)
        lo_list.append(p[ii])
        hi_list.append(p[ii + 1])
        slot_list.append(kk)
        exact = np.abs(r) <= REFINE_THETA_TOL / 4
        ej, ek = np.nonzero(exact & v)
        lo_list.append(p[ej])
        hi_list.append(p[ej])
        slot_list.append(ek)

    lo = np.concatenate(lo_list)
    hi = np.concatenate(hi_list)
    slots = np.concatenate(slot_list)
    if lo.size == 0:
        return []

    rows = np.arange(lo.size)
    flo = pc.curves(lo).theta[rows, slots] - target

    def probe(x):
        c = pc.curves(x)
        return c.theta[rows, slots] - target, c.valid[rows, slots]

    # phase 1: bisection, robust to invalid pockets (crossing-count
    # changes inside a bracket shrink it from the right)
    for _ in range(5):
        mid = 0.5 * (lo + hi)
        fmid, ok = probe(mid)
        move_lo = ok & ((fmid > 0.0) == (flo > 0.0))
        lo = np.where(move_lo, mid, lo)
        flo = np.where(move_lo, fmid, flo)
        hi = np.where(move_lo, hi, mid)
    # phase 2: false position with the Illinois halving (plain secant
    # stalls on convex curves, retaining one endpoint forever); the
    # midpoint fallback keeps worst-case convergence at bisection rate
    fhi, _ = probe(hi)
    prev_move_lo = None
    for _ in range(min(REFINE_MAX_ITER, 24)):
        # width-based exit only: the Illinois halving below makes the
        # stored endpoint values unreliable as residual estimates
        if np.all(hi - lo < 1e-13):
            break
        denom = fhi - flo
        with np.errstate(divide="ignore", invalid="ignore"):
            x = hi - fhi * (hi - lo) / denom
        x = np.where(np.isfinite(x) & (x > lo) & (x < hi), x,
                     0.5 * (lo + hi))
        fx, ok = probe(x)
        move_lo = ok & ((fx > 0.0) == (flo > 0.0))
        lo = np.where(move_lo, x, lo)
        flo = np.where(move_lo, fx, flo)
        hi = np.where(move_lo, hi, x)
        fhi = np.where(move_lo, fhi, np.where(ok, fx, fhi))
        if prev_move_lo is not None:
            fhi = np.where(move_lo & prev_move_lo, 0.5 * fhi, fhi)
            flo = np.where(~move_lo & ~prev_move_lo, 0.5 * flo, flo)
        prev_move_lo = move_lo

    mid = np.where(np.abs(flo) <= np.abs(fhi), lo, hi)
    c = pc.curves(mid)
    out: List[SweepCandidate] = []
    for j in range(mid.size):
        k = slots[j]
        if not c.valid[j, k]:
            continue
        s_val = float(c.s[j, k])
        t_val = float(c.theta[j, k])
        if s_val < 1e-9 or s_val > s_cap:
            continue
        if abs(t_val - target) > 1e-6:
            continue  # stuck bracket (crossing-count change), not a root
        out.append(SweepCandidate(phi0=float(mid[j]), length=s_val,
                                  swept=t_val, end_down=bool(c.down[j, k]),
                                  kind="sweep",
                                  theta_residual=abs(t_val - target)))
    return out
