"""Plate-motion profiles, plate pairs, and the resonance machinery.

A profile is an immutable law ``z = f(t)`` with closed-form derivatives of
every supported order.  Four analytic catalog kinds cover scenario input
(constant, sinusoid, sum of harmonics, windowed polynomial); a fifth derived
kind traces piecewise-parabolic flight arcs and is produced when a periodic
ball orbit is promoted to an upper plate.

All evaluation accepts scalars or numpy arrays.  Conservative envelope and
velocity bounds back the root-finder's exclusion arguments; the sharper
``peak_velocity`` extremum backs the resonance tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateProfile,
    OrderUnsupported,
    OutOfWindow,
    ProfileError,
)

_TWO_PI = 2.0 * math.pi
_GRID = 4096  # samples per period for bracketing scans


class ForcingProfile:
    """Shared interface; concrete kinds implement ``_eval_impl``."""

    kind: str = "abstract"
    period: Optional[float] = None
    max_derivative_order: int = 16

    def eval(self, t, order: int = 0):
        """Order-th derivative of f at t (order 0 is f itself)."""
        if order < 0:
            raise ValueError("derivative order must be >= 0")
        if order > self.max_derivative_order:
            raise OrderUnsupported(
                f"{self.kind} profile supports orders <= {self.max_derivative_order},"
                f" got {order}"
            )
        if isinstance(t, float) or np.ndim(t) == 0:
            tf = float(t)
            self._check_window(tf)
            return self._eval_scalar(tf, order)
        tt = np.asarray(t, dtype=float)
        self._check_window(tt)
        return self._eval_impl(tt, order)

    def _eval_scalar(self, t: float, order: int) -> float:
        return float(self._eval_impl(np.asarray(t), order))

    # window handling (only windowed kinds restrict the domain)
    def window(self) -> Optional[tuple]:
        return None

    def _check_window(self, t):
        win = self.window()
        if win is None:
            return
        lo, hi = win
        if np.any(t < lo) or np.any(t > hi):
            raise OutOfWindow(f"t outside validity window [{lo}, {hi}]")

    def _eval_impl(self, t, order):
        raise NotImplementedError

    # conservative bounds used by the event solver's exclusion steps
    def envelope_bounds(self) -> tuple:
        raise NotImplementedError

    def velocity_bound(self) -> float:
        """Conservative upper bound on sup |f'(t)|."""
        raise NotImplementedError

    def step_cap(self) -> float:
        """Largest marching step safe against the profile's oscillation."""
        if self.period is not None:
            return self.period / 4.0
        lo, hi = self.window()
        return (hi - lo) / 4.0

    def rescaled(self, c: float) -> "ForcingProfile":
        """Profile t -> f(c t), period T/c.  Periodic kinds only."""
        raise ProfileError(f"{self.kind} profile cannot be time-rescaled")

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass
class ConstantProfile(ForcingProfile):
    level: float = 0.0
    period: float = 1.0
    kind: str = "constant"

    def _eval_impl(self, t, order):
        if order == 0:
            return self.level + t * 0.0
        return t * 0.0

    def _eval_scalar(self, t, order):
        return self.level if order == 0 else 0.0

    def envelope_bounds(self):
        return (self.level, self.level)

    def velocity_bound(self):
        return 0.0

    def rescaled(self, c):
        return ConstantProfile(self.level, self.period / c)

    def describe(self):
        return {"kind": self.kind, "level": self.level, "period": self.period}


@dataclass
class SinusoidProfile(ForcingProfile):
    """f(t) = offset + A sin(2 pi t / T + phase)."""

    amplitude: float = 1.0
    period: float = 1.0
    phase: float = 0.0
    offset: float = 0.0
    kind: str = "sinusoid"

    def __post_init__(self):
        if self.period <= 0:
            raise ProfileError("period must be positive")

    @property
    def omega(self):
        return _TWO_PI / self.period

    def _eval_impl(self, t, order):
        w = self.omega
        val = self.amplitude * w**order * np.sin(w * t + self.phase + order * math.pi / 2.0)
        if order == 0:
            val = val + self.offset
        return val

    def _eval_scalar(self, t, order):
        w = self.omega
        val = self.amplitude * w**order * math.sin(w * t + self.phase + order * math.pi / 2.0)
        return val + self.offset if order == 0 else val

    def envelope_bounds(self):
        a = abs(self.amplitude)
        return (self.offset - a, self.offset + a)

    def velocity_bound(self):
        return abs(self.amplitude) * self.omega

    def rescaled(self, c):
        return SinusoidProfile(self.amplitude, self.period / c, self.phase, self.offset)

    def describe(self):
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "period": self.period,
            "phase": self.phase,
            "offset": self.offset,
        }


@dataclass
class HarmonicsProfile(ForcingProfile):
    """f(t) = offset + sum_j A_j sin(w_j t + phi_j), w_j = 2 pi k_j / T."""

    terms: Sequence[tuple] = ()
    period: float = 1.0
    offset: float = 0.0
    kind: str = "harmonics"

    def __post_init__(self):
        if self.period <= 0:
            raise ProfileError("period must be positive")
        base = _TWO_PI / self.period
        for amp, w, phi in self.terms:
            ratio = w / base
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ProfileError(
                    f"harmonic frequency {w} is not a positive integer multiple"
                    f" of 2 pi / T = {base}"
                )
        self.terms = tuple((float(a), float(w), float(p)) for a, w, p in self.terms)

    def _eval_impl(self, t, order):
        val = t * 0.0
        for amp, w, phi in self.terms:
            val = val + amp * w**order * np.sin(w * t + phi + order * math.pi / 2.0)
        if order == 0:
            val = val + self.offset
        return val

    def _eval_scalar(self, t, order):
        shift = order * math.pi / 2.0
        val = 0.0
        for amp, w, phi in self.terms:
            val += amp * w**order * math.sin(w * t + phi + shift)
        return val + self.offset if order == 0 else val

    def envelope_bounds(self):
        a = sum(abs(amp) for amp, _, _ in self.terms)
        return (self.offset - a, self.offset + a)

    def velocity_bound(self):
        return sum(abs(amp) * abs(w) for amp, w, _ in self.terms)

    def rescaled(self, c):
        terms = tuple((a, w * c, p) for a, w, p in self.terms)
        return HarmonicsProfile(terms, self.period / c, self.offset)

    def describe(self):
        return {
            "kind": self.kind,
            "terms": [list(term) for term in self.terms],
            "period": self.period,
            "offset": self.offset,
        }


@dataclass
class PolynomialWindow(ForcingProfile):
    """f(t) = sum_i a_i t^i on a closed validity window; not periodic."""

    coefficients: Sequence[float] = (0.0,)
    window_bounds: tuple = (-1.0, 1.0)
    kind: str = "polynomial"
    period = None

    def __post_init__(self):
        self.coefficients = tuple(float(c) for c in self.coefficients)
        lo, hi = self.window_bounds
        if not lo < hi:
            raise ProfileError("window must satisfy lo < hi")
        self.window_bounds = (float(lo), float(hi))
        self._dcache = {}

    def window(self):
        return self.window_bounds

    def _deriv_coeffs(self, order):
        cached = self._dcache.get(order)
        if cached is None:
            c = np.asarray(self.coefficients, dtype=float)
            for _ in range(order):
                if len(c) <= 1:
                    c = np.zeros(1)
                    break
                c = c[1:] * np.arange(1, len(c))
            cached = self._dcache[order] = c
        return cached

    def _eval_impl(self, t, order):
        return np.polynomial.polynomial.polyval(t, self._deriv_coeffs(order))

    def _eval_scalar(self, t, order):
        acc = 0.0
        for c in reversed(self._deriv_coeffs(order)):
            acc = acc * t + c
        return acc

    def _extrema(self, order):
        """Exact min/max of the order-th derivative over the window."""
        lo, hi = self.window_bounds
        c = self._deriv_coeffs(order)
        candidates = [lo, hi]
        dc = np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1)
        if len(dc) > 1 or (len(dc) == 1 and dc[0] != 0.0):
            roots = np.polynomial.polynomial.polyroots(dc)
            for r in roots:
                if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                    candidates.append(float(r.real))
        vals = np.polynomial.polynomial.polyval(np.asarray(candidates), c)
        return float(vals.min()), float(vals.max())

    def envelope_bounds(self):
        return self._extrema(0)

    def velocity_bound(self):
        mn, mx = self._extrema(1)
        return max(abs(mn), abs(mx))

    def describe(self):
        return {
            "kind": self.kind,
            "coefficients": list(self.coefficients),
            "window": list(self.window_bounds),
        }


@dataclass
class ParabolicArcs(ForcingProfile):
    """Periodic profile tracing ballistic arcs z = z_j + v_j s - a s^2 / 2.

    ``anchors`` holds (offset, z, v) per arc, offsets strictly increasing in
    [0, period).  At arc boundaries evaluation follows the left arc, so
    derivative queries at a touch instant return the landing-side values.
    """

    anchors: Sequence[tuple] = ((0.0, 0.0, 1.0),)
    period: float = 1.0
    accel: float = 1.0
    t_ref: float = 0.0
    kind: str = "parabolic_arcs"

    def __post_init__(self):
        anchors = tuple((float(o), float(z), float(v)) for o, z, v in self.anchors)
        offs = [a[0] for a in anchors]
        if offs[0] != 0.0 or any(b <= a for a, b in zip(offs, offs[1:])):
            raise ProfileError("arc offsets must start at 0 and strictly increase")
        if offs[-1] >= self.period:
            raise ProfileError("arc offsets must stay below the period")
        self.anchors = anchors
        self._offsets = np.asarray(offs)

    def _locate(self, s):
        # left convention: s exactly at a boundary belongs to the previous arc
        idx = np.searchsorted(self._offsets, s, side="left") - 1
        return idx

    def _eval_impl(self, t, order):
        s = np.mod(np.asarray(t, dtype=float) - self.t_ref, self.period)
        idx = self._locate(s)
        wrapped = idx < 0
        idx = np.where(wrapped, len(self.anchors) - 1, idx)
        offs = self._offsets[idx]
        rel = np.where(wrapped, s + self.period - offs, s - offs)
        z0 = np.asarray([a[1] for a in self.anchors])[idx]
        v0 = np.asarray([a[2] for a in self.anchors])[idx]
        if order == 0:
            return z0 + v0 * rel - 0.5 * self.accel * rel * rel
        if order == 1:
            return v0 - self.accel * rel
        if order == 2:
            return np.full_like(rel, -self.accel)
        return rel * 0.0

    def _eval_scalar(self, t, order):
        s = (t - self.t_ref) % self.period
        idx = -1
        for i, (off, _, _) in enumerate(self.anchors):
            if s > off:
                idx = i
            else:
                break
        if idx < 0:
            idx = len(self.anchors) - 1
            rel = s + self.period - self.anchors[idx][0]
        else:
            rel = s - self.anchors[idx][0]
        _, z0, v0 = self.anchors[idx]
        if order == 0:
            return z0 + v0 * rel - 0.5 * self.accel * rel * rel
        if order == 1:
            return v0 - self.accel * rel
        if order == 2:
            return -self.accel
        return 0.0

    def _arc_durations(self):
        offs = list(self._offsets) + [self.period]
        return [b - a for a, b in zip(offs, offs[1:])]

    def envelope_bounds(self):
        lo = math.inf
        hi = -math.inf
        for (off, z, v), dur in zip(self.anchors, self._arc_durations()):
            ends = [z, z + v * dur - 0.5 * self.accel * dur * dur]
            if self.accel > 0 and 0.0 < v / self.accel < dur:
                ends.append(z + 0.5 * v * v / self.accel)
            lo = min(lo, min(ends))
            hi = max(hi, max(ends))
        return (lo, hi)

    def velocity_bound(self):
        worst = 0.0
        for (off, z, v), dur in zip(self.anchors, self._arc_durations()):
            worst = max(worst, abs(v), abs(v - self.accel * dur))
        return worst

    def describe(self):
        return {
            "kind": self.kind,
            "anchors": [list(a) for a in self.anchors],
            "period": self.period,
            "accel": self.accel,
            "t_ref": self.t_ref,
        }


def make_profile(spec: dict) -> ForcingProfile:
    """Build a profile from a plain-dict description (config surface)."""
    kind = spec.get("kind")
    if kind == "constant":
        return ConstantProfile(spec.get("level", 0.0), spec.get("period", 1.0))
    if kind == "sinusoid":
        return SinusoidProfile(
            spec["amplitude"], spec["period"], spec.get("phase", 0.0), spec.get("offset", 0.0)
        )
    if kind == "harmonics":
        return HarmonicsProfile(
            tuple(tuple(t) for t in spec["terms"]), spec["period"], spec.get("offset", 0.0)
        )
    if kind == "polynomial":
        return PolynomialWindow(tuple(spec["coefficients"]), tuple(spec["window"]))
    if kind == "parabolic_arcs":
        return ParabolicArcs(
            tuple(tuple(a) for a in spec["anchors"]),
            spec["period"],
            spec["accel"],
            spec.get("t_ref", 0.0),
        )
    raise ProfileError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# plate pairs and tangencies


@dataclass
class Tangency:
    """Declared plate touch: instant, contact order k, one-sided gap window."""

    t_star: float
    order: int
    window: float  # gap verified positive on (t_star - window, t_star)

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ProfileError("contact order must be 1 or 2")
        if self.window <= 0:
            raise ProfileError("tangency window must be positive")


@dataclass
class PlatePair:
    """Lower/upper plate profiles, optionally touching at a declared instant."""

    lower: ForcingProfile
    upper: ForcingProfile
    tangency: Optional[Tangency] = None

    def common_span(self) -> tuple:
        """Interval on which gap checks sample both profiles."""
        wins = [p.window() for p in (self.lower, self.upper) if p.window() is not None]
        if wins:
            lo = max(w[0] for w in wins)
            hi = min(w[1] for w in wins)
            if not lo < hi:
                raise ProfileError("plate windows do not overlap")
            return (lo, hi)
        p1, p2 = self.lower.period, self.upper.period
        big, small = max(p1, p2), min(p1, p2)
        ratio = big / small
        if abs(ratio - round(ratio)) > 1e-9:
            raise ProfileError("plate periods are not integer multiples")
        return (0.0, big)

    def min_gap_sampled(self, n: int = _GRID) -> float:
        lo, hi = self.common_span()
        ts = np.linspace(lo, hi, n)
        return float(np.min(self.upper.eval(ts) - self.lower.eval(ts)))

    def sup_gap_bound(self) -> float:
        """Upper bound on sup over independent times of |f2(t2) - f1(t1)|."""
        lo1, hi1 = self.lower.envelope_bounds()
        lo2, hi2 = self.upper.envelope_bounds()
        return max(hi2 - lo1, hi1 - lo2)

    def verify(self, rtol: float = 1e-9) -> None:
        """Check separation, or the declared tangency structure.

        Raises ProfileError on failure.
        """
        if self.tangency is None:
            if self.min_gap_sampled() <= 0.0:
                raise ProfileError("plates touch but no tangency was declared")
            return
        ts, k, eps = self.tangency.t_star, self.tangency.order, self.tangency.window
        scale = 1.0 + abs(self.upper.eval(ts))
        for j in range(k):
            d = abs(self.upper.eval(ts, j) - self.lower.eval(ts, j))
            if d > rtol * scale:
                raise ProfileError(
                    f"tangency order {k} declared but derivatives differ at order {j}"
                )
        dk = abs(self.upper.eval(ts, k) - self.lower.eval(ts, k))
        if dk <= rtol * scale:
            raise ProfileError(f"order-{k} derivatives coincide; contact order is deeper")
        # gap positive approaching the touch from the left
        probes = ts - eps * np.geomspace(1e-6, 1.0, 64)
        gaps = self.upper.eval(probes) - self.lower.eval(probes)
        if np.any(gaps <= 0.0):
            raise ProfileError("gap not positive on the declared left window")


# ---------------------------------------------------------------------------
# resonance machinery


@dataclass
class ResonanceMatch:
    """Witness that the plate velocity reaches k T g / 2 at time t0."""

    t0: float
    k: int


def _bisect_scalar(fun, a, b, fa, fb, tol=1e-12, max_iter=200):
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        if b - a < tol:
            return m
        fm = fun(m)
        if fm == 0.0:
            return m
        if (fa < 0.0) != (fm < 0.0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def peak_velocity(profile: ForcingProfile, n: int = 4 * _GRID) -> float:
    """Signed maximum of f'(t) over one period (grid scan + local parabola)."""
    if profile.period is None:
        raise ProfileError("peak velocity scan requires a periodic profile")
    T = profile.period
    ts = np.linspace(0.0, T, n, endpoint=False)
    vals = profile.eval(ts, 1)
    i = int(np.argmax(vals))
    h = T / n
    t_im, t_ip = ts[i] - h, ts[i] + h
    f_im = profile.eval(t_im, 1)
    f_ip = profile.eval(t_ip, 1)
    denom = f_im - 2.0 * vals[i] + f_ip
    best = float(vals[i])
    if denom < 0.0:
        shift = 0.5 * h * (f_im - f_ip) / denom
        if abs(shift) <= h:
            best = max(best, float(profile.eval(ts[i] + shift, 1)))
    return best


def resonance_match(
    profile: ForcingProfile, g: float, k_max: int
) -> Optional[ResonanceMatch]:
    """Smallest k <= k_max with a solution of f'(t0) = k T g / 2, if any.

    Bracketing on a 4096-point grid per period, then bisection to 1e-12 in t.
    Absence of a match is an ordinary result, not an error.
    """
    if g <= 0:
        raise ValueError("resonance test requires g > 0")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if profile.period is None:
        raise ProfileError("resonance test requires a periodic profile")
    T = profile.period
    ts = np.linspace(0.0, T, _GRID + 1)
    dvals = profile.eval(ts, 1)
    for k in range(1, k_max + 1):
        target = k * T * g / 2.0
        d = dvals - target
        exact = np.flatnonzero(d == 0.0)
        if exact.size:
            return ResonanceMatch(float(ts[exact[0]] % T), k)
        flips = np.flatnonzero(d[:-1] * d[1:] < 0.0)
        if flips.size:
            i = int(flips[0])
            fun = lambda t: profile.eval(t, 1) - target
            t0 = _bisect_scalar(fun, ts[i], ts[i + 1], d[i], d[i + 1])
            return ResonanceMatch(float(t0 % T), k)
    return None


def critical_rescale_factor(profile: ForcingProfile, g: float) -> float:
    """Threshold c0 with t -> f(c t) resonant at k = 1 exactly when c >= c0.

    Rescaling multiplies the peak plate velocity by c and divides the period
    by c, so the k = 1 match condition c * sup f' >= (T / c) g / 2 closes at
    c0 = sqrt(T g / (2 sup f')).
    """
    if g <= 0:
        raise ValueError("rescale threshold requires g > 0")
    sup = peak_velocity(profile)
    if sup <= 0.0:
        raise DegenerateProfile("profile has no positive peak velocity")
    return math.sqrt(profile.period * g / (2.0 * sup))
