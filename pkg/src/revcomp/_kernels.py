"""Numba kernels for the distance engine's inner loops (internal).

Profiles are handed to the kernels as uniform piecewise-polynomial
coefficient tables (descending powers of the local variable, one column
per segment), so a function evaluation is an index computation plus a
short Horner loop and the whole leg quadrature fuses into one pass with
no intermediate arrays.
"""

import numpy as np
from numba import njit

_TAYLOR_ZONE = 1e-6


@njit(cache=True, inline="always")
def _peval(c, width, x):
    """Evaluate a uniform-breakpoint piecewise polynomial at scalar x."""
    nseg = c.shape[1]
    i = int(x / width)
    if i < 0:
        i = 0
    elif i >= nseg:
        i = nseg - 1
    t = x - i * width
    acc = c[0, i]
    for m in range(1, c.shape[0]):
        acc = acc * t + c[m, i]
    return acc


@njit(cache=True)
def turning_kernel(c_f, c_f1, width, nu, lo_in, hi_in, increasing):
    """Roots of f(r) = nu on per-element brackets of known sense.

    Bisection carries the bracket width below 1e-9 (Newton alone is
    only linearly convergent near the equator, where the root is nearly
    double); clamped Newton then polishes to machine accuracy.
    """
    n = nu.size
    out = np.empty(n)
    for i in range(n):
        lo = lo_in[i]
        hi = hi_in[i]
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            above = _peval(c_f, width, mid) > nu[i]
            if above == increasing:
                hi = mid
            else:
                lo = mid
        r = 0.5 * (lo + hi)
        for _ in range(3):
            fr = _peval(c_f, width, r) - nu[i]
            d = _peval(c_f1, width, r)
            if -1e-14 < d < 1e-14:
                d = 1e-14 if d >= 0 else -1e-14
            r = r - fr / d
            if r < lo:
                r = lo
            elif r > hi:
                r = hi
        out[i] = r
    return out


# When a turning radius sits near a pole the swept-angle integrand
# carries a nu/f spike whose scale is set by the turning radius itself;
# pieces in a geometric cascade (fixed scale ratio per piece) keep the
# Gauss rule's convergence rate independent of how deep into the pole
# region the band reaches.
POLE_LAYER = 0.05
LAYER_FACTOR = 50.0
MAX_BOUNDS = 22


@njit(cache=True)
def legs_kernel(c_f, c_f1, c_f2, width, length, nu, rm, rp, xi_lo, xi_hi,
                gl_nodes, gl_weights):
    """(s, theta) leg integrals, fused over directions/legs/pieces/nodes.

    Implements the substitution r = m - h*cos(xi) with substitution-
    native turning offsets and the near-turning Taylor guard; each leg
    [xi_lo, xi_hi] is split at the per-direction pole-cascade
    boundaries.
    """
    n, L = xi_lo.shape
    q = gl_nodes.size
    s_out = np.empty((n, L))
    t_out = np.empty((n, L))
    bounds = np.empty(MAX_BOUNDS)
    for i in range(n):
        nui = nu[i]
        rmi = rm[i]
        rpi = rp[i]
        h = 0.5 * (rpi - rmi)
        f1m = _peval(c_f1, width, rmi)
        f2m = _peval(c_f2, width, rmi)
        f1p = _peval(c_f1, width, rpi)
        f2p = _peval(c_f2, width, rpi)

        # ascending cascade boundaries in xi for this direction
        nb = 0
        if h > 1e-300:
            if rmi < POLE_LAYER:
                d = LAYER_FACTOR * rmi
                while d < 0.45 * h and nb < MAX_BOUNDS // 2:
                    ratio = d / (2.0 * h)
                    bounds[nb] = 2.0 * np.arcsin(np.sqrt(ratio))
                    nb += 1
                    d *= LAYER_FACTOR
            nright = 0
            if (length - rpi) < POLE_LAYER:
                d = LAYER_FACTOR * (length - rpi)
                base = nb
                while d < 0.45 * h and nright < MAX_BOUNDS // 2:
                    ratio = d / (2.0 * h)
                    bounds[base + nright] = np.pi - 2.0 * np.arcsin(np.sqrt(ratio))
                    nright += 1
                    d *= LAYER_FACTOR
                # the right cascade was generated descending; reverse it
                for a in range(nright // 2):
                    tmp = bounds[base + a]
                    bounds[base + a] = bounds[base + nright - 1 - a]
                    bounds[base + nright - 1 - a] = tmp
                nb += nright

        for l in range(L):
            lo = xi_lo[i, l]
            hi = xi_hi[i, l]
            s_acc = 0.0
            t_acc = 0.0
            plo = lo
            for piece in range(nb + 1):
                if piece < nb:
                    b = bounds[piece]
                    if b < plo:
                        b = plo
                    elif b > hi:
                        b = hi
                    phi_b = b
                else:
                    phi_b = hi
                span = phi_b - plo
                if span > 0.0:
                    for k in range(q):
                        xi = plo + span * gl_nodes[k]
                        sh = np.sin(0.5 * xi)
                        ch = np.cos(0.5 * xi)
                        dm = 2.0 * h * sh * sh
                        dp = 2.0 * h * ch * ch
                        fv = _peval(c_f, width, rmi + dm)
                        if dm < _TAYLOR_ZONE:
                            fmnu = f1m * dm + 0.5 * f2m * dm * dm
                        elif dp < _TAYLOR_ZONE:
                            fmnu = -f1p * dp + 0.5 * f2p * dp * dp
                        else:
                            fmnu = fv - nui
                        denom = dm * dp
                        if denom < 1e-300:
                            denom = 1e-300
                        w = fmnu * (fv + nui) / denom
                        if w < 1e-300:
                            w = 1e-300
                        root = np.sqrt(w)
                        wq = gl_weights[k] * span
                        s_acc += wq * fv / root
                        t_acc += wq / (fv * root)
                plo = phi_b
            s_out[i, l] = s_acc
            t_out[i, l] = t_acc * nui
    return s_out, t_out
