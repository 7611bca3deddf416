"""Compiled batch iteration of the two-plate round trip.

Mirrors the object-path marching in collision.py for plates that lower to
harmonic form (constant, sinusoid, sum of harmonics).  Parameter layout:
``[offset, n_terms, A0, w0, phi0, A1, w1, phi1, ...]``.  Falls back to
plain Python when numba is unavailable; the algorithm is identical.
"""

from __future__ import annotations

import math

import numpy as np

from .collision import RootSolveSettings
from .forcing import ConstantProfile, HarmonicsProfile, PlatePair, SinusoidProfile

try:
    import numba

    _njit = numba.njit(cache=True, fastmath=False)
except ImportError:  # pragma: no cover - numba is a declared dependency
    def _njit(fun):
        return fun

_EPS = 2.220446049250313e-16
_HALF_PI = 0.5 * math.pi
_BIG = 1e18
_MAX_STEPS = 10**6

# hit statuses
_FOUND = 0
_NO_IMPACT = 1
_GRAZING = 2
_BAD_SIGN = 3


@_njit
def _peval(par, t, order):
    n = int(par[1])
    val = 0.0
    for j in range(n):
        a = par[2 + 3 * j]
        w = par[3 + 3 * j]
        p = par[4 + 3 * j]
        val += a * w**order * math.sin(w * t + p + order * _HALF_PI)
    if order == 0:
        val += par[0]
    return val


@_njit
def _gap(par, t0, z0, v0, g, x):
    return z0 + v0 * x - 0.5 * g * x * x - _peval(par, t0 + x, 0)


@_njit
def _refine(par, t0, z0, v0, g, a, b, fa, fb, tol):
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    prev_width = b - a
    for _ in range(220):
        width = b - a
        if width < max(1e-4 * tol, 8.0 * _EPS * max(1.0, abs(a), abs(b))):
            break
        use_secant = width <= 0.6 * prev_width and fb != fa
        prev_width = width
        if use_secant:
            x = b - fb * (b - a) / (fb - fa)
            margin = 0.125 * width
            if not (a + margin <= x <= b - margin):
                x = 0.5 * (a + b)
        else:
            x = 0.5 * (a + b)
        fx = _gap(par, t0, z0, v0, g, x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (fa < 0.0):
            a, fa = x, fx
        else:
            b, fb = x, fx
    return 0.5 * (a + b)


@_njit
def _hit(par, f_lo, f_hi, sup_df, cap, t0, z0, v0, g, sgn, tol, graze, x_limit):
    """First transversal gap root; returns (status, t_hit, plate_velocity)."""
    floor_step = 8.0 * tol
    if x_limit <= tol:
        return _NO_IMPACT, 0.0, 0.0
    x = tol
    gx = _gap(par, t0, z0, v0, g, x)
    if gx == 0.0 or (gx > 0.0) != (sgn > 0.0):
        return _BAD_SIGN, 0.0, 0.0

    for _ in range(_MAX_STEPS):
        v_here = v0 - g * x
        z_here = z0 + v0 * x - 0.5 * g * x * x
        have_jump = False
        x_next = x
        if sgn > 0.0:
            if v_here > sup_df:
                if g == 0.0:
                    return _NO_IMPACT, 0.0, 0.0
                x_next = (v0 - sup_df) / g
                have_jump = True
            elif z_here > f_hi:
                if g > 0.0:
                    disc = v0 * v0 - 2.0 * g * (f_hi - z0)
                    if disc < 0.0:
                        disc = 0.0
                    x_next = (v0 + math.sqrt(disc)) / g
                    have_jump = True
                elif v0 < 0.0:
                    x_next = (f_hi - z0) / v0
                    have_jump = True
                else:
                    return _NO_IMPACT, 0.0, 0.0
            elif v_here < -sup_df:
                x_next = x + cap
                have_jump = True
        else:
            if v_here < -sup_df:
                return _NO_IMPACT, 0.0, 0.0
            if z_here < f_lo:
                if g > 0.0:
                    disc = v0 * v0 - 2.0 * g * (f_lo - z0)
                    if disc < 0.0:
                        return _NO_IMPACT, 0.0, 0.0
                    x_up = (v0 - math.sqrt(disc)) / g
                    if x_up >= x:
                        x_next = x_up
                        have_jump = True
                    elif x <= (v0 + math.sqrt(disc)) / g:
                        x_next = x  # band-edge rounding, creep below
                        have_jump = False
                    else:
                        return _NO_IMPACT, 0.0, 0.0
                elif v0 > 0.0:
                    x_next = (f_lo - z0) / v0
                    have_jump = True
                else:
                    return _NO_IMPACT, 0.0, 0.0
            elif v_here > sup_df:
                zone_end = _BIG if g == 0.0 else (v0 - sup_df) / g
                x_next = x + cap
                if zone_end > x + floor_step and x_next > zone_end:
                    x_next = zone_end
                have_jump = True
        if not have_jump or x_next <= x + floor_step:
            scale = abs(v_here) + sup_df + g * cap
            step = 0.9 * abs(gx) / scale
            if step > cap:
                step = cap
            if step < floor_step:
                step = floor_step
            x_next = x + step

        if x_next < x + floor_step:
            x_next = x + floor_step
        boundary = False
        if x_next >= x_limit:
            x_next = x_limit
            boundary = True
        g_next = _gap(par, t0, z0, v0, g, x_next)
        if g_next == 0.0 or (g_next > 0.0) != (sgn > 0.0):
            root = _refine(par, t0, z0, v0, g, x, x_next, gx, g_next, tol)
            slope = (v0 - g * root) - _peval(par, t0 + root, 1)
            if abs(slope) < graze:
                return _GRAZING, 0.0, 0.0
            t_hit = t0 + root
            return _FOUND, t_hit, _peval(par, t_hit, 1)
        if boundary:
            return _NO_IMPACT, 0.0, 0.0
        x, gx = x_next, g_next
    return _NO_IMPACT, 0.0, 0.0


# iteration statuses, matching fermi_ulam._STATUS_NAMES
_OK = 0
_BELOW_VALIDITY = 1
_GRAZE_STOP = 2
_ESCAPE = 3


@_njit
def _iterate(low, up, f1lo, f1hi, f2lo, f2hi, sup1, sup2, cap1, cap2,
             g, t0, v0, n, tol, graze, ts, vs, mts, mvs):
    t = t0
    v = v0
    for i in range(n):
        if v <= _peval(low, t, 1):
            return i, _BELOW_VALIDITY
        z0 = _peval(low, t, 0)
        st, tm, df2 = _hit(up, f2lo, f2hi, sup2, cap2, t, z0, v, g,
                           -1.0, tol, graze, _BIG)
        if st == _GRAZING:
            return i, _GRAZE_STOP
        if st != _FOUND:
            return i, _BELOW_VALIDITY
        stg, _, _ = _hit(low, f1lo, f1hi, sup1, cap1, t, z0, v, g,
                         1.0, tol, graze, tm - tol - t)
        if stg == _FOUND:
            return i, _BELOW_VALIDITY
        if stg == _GRAZING:
            return i, _GRAZE_STOP
        vm = -v + g * (tm - t) + 2.0 * df2
        z2 = _peval(up, tm, 0)
        st, t2, df1 = _hit(low, f1lo, f1hi, sup1, cap1, tm, z2, vm, g,
                           1.0, tol, graze, _BIG)
        if st == _GRAZING:
            return i, _GRAZE_STOP
        if st != _FOUND:
            return i, _ESCAPE
        stg, _, _ = _hit(up, f2lo, f2hi, sup2, cap2, tm, z2, vm, g,
                         -1.0, tol, graze, t2 - tol - tm)
        if stg == _FOUND:
            return i, _BELOW_VALIDITY
        if stg == _GRAZING:
            return i, _GRAZE_STOP
        v2 = v + g * (t2 - 2.0 * tm + t) + 2.0 * df1 - 2.0 * df2
        ts[i] = t2
        vs[i] = v2
        mts[i] = tm
        mvs[i] = vm
        t = t2
        v = v2
    return n, _OK


def lower_profile(profile):
    """Harmonic parameter vector for a profile, or None if not lowerable."""
    if isinstance(profile, ConstantProfile):
        return np.asarray([profile.level, 0.0])
    if isinstance(profile, SinusoidProfile):
        return np.asarray(
            [profile.offset, 1.0, profile.amplitude, profile.omega, profile.phase]
        )
    if isinstance(profile, HarmonicsProfile):
        par = [profile.offset, float(len(profile.terms))]
        for a, w, p in profile.terms:
            par.extend((a, w, p))
        return np.asarray(par)
    return None


def lower_pair(plates: PlatePair):
    """Kernel argument bundle for a plate pair, or None if unsupported."""
    low = lower_profile(plates.lower)
    up = lower_profile(plates.upper)
    if low is None or up is None:
        return None
    f1lo, f1hi = plates.lower.envelope_bounds()
    f2lo, f2hi = plates.upper.envelope_bounds()
    return (
        low, up, f1lo, f1hi, f2lo, f2hi,
        plates.lower.velocity_bound(), plates.upper.velocity_bound(),
        plates.lower.step_cap(), plates.upper.step_cap(),
    )


def iterate(lowered, g, t0, v0, n_steps, settings: RootSolveSettings):
    ts = np.empty(n_steps)
    vs = np.empty(n_steps)
    mts = np.empty(n_steps)
    mvs = np.empty(n_steps)
    n_done, code = _iterate(
        *lowered, g, t0, v0, n_steps,
        settings.t_tol, settings.grazing_slope_floor, ts, vs, mts, mvs,
    )
    return ts, vs, mts, mvs, int(n_done), int(code)
