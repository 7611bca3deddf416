"""Flight-versus-plate event location plus the elastic collision laws.

The event solver finds the first transversal root of the gap
``G(tau) = z(tau) - f(tau)`` along a parabolic flight.  Marching never
trusts a fixed step alone: it combines closed-form exclusion jumps (the
flight cannot touch the plate while outside the plate's envelope band, or
while separating faster than the plate can move) with Lipschitz-limited
steps in the ambiguous zone, so the first crossing cannot be skipped for
profiles with bounded velocity.  Brackets are polished by a safeguarded
secant/bisection loop well below ``t_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import GrazingImpact, NoImpact
from .forcing import ForcingProfile

_EPS = 2.220446049250313e-16

FROM_ABOVE = "from_above"
FROM_BELOW = "from_below"


@dataclass
class FlightState:
    """Ballistic state: z(tau) = z + v (tau - t) - g (tau - t)^2 / 2."""

    t: float
    z: float
    v: float
    g: float

    def height(self, tau):
        dt = tau - self.t
        return self.z + self.v * dt - 0.5 * self.g * dt * dt

    def velocity(self, tau):
        return self.v - self.g * (tau - self.t)


@dataclass
class RootSolveSettings:
    t_tol: float = 1e-11
    max_bracket_steps: int = 10**6
    grazing_slope_floor: float = 1e-8

    def __post_init__(self):
        if self.t_tol <= 0:
            raise ValueError("t_tol must be positive")
        if self.grazing_slope_floor <= 0:
            raise ValueError("grazing_slope_floor must be positive")


DEFAULT_SETTINGS = RootSolveSettings()


def reflect_off_plate(v_in: float, plate_velocity: float) -> float:
    """Elastic reflection off an infinitely heavy wall moving at plate_velocity."""
    return -v_in + 2.0 * plate_velocity


def ball_ball_collide(m1: float, v1_minus: float, m2: float, v2_minus: float):
    """Post-collision velocities for a 1-D elastic two-body collision."""
    total = m1 + m2
    if total <= 0.0:
        raise ValueError("total mass must be positive")
    alpha = (m1 - m2) / total
    v1_plus = alpha * v1_minus + (1.0 - alpha) * v2_minus
    v2_plus = (1.0 + alpha) * v1_minus - alpha * v2_minus
    return v1_plus, v2_plus


def _refine(gap, a, b, fa, fb, tol):
    """Root of gap on a sign-changing bracket.

    Polishes four decades below ``tol`` (bottoming out at machine
    precision), so the guaranteed bound stays ``tol`` while independent
    solvers of the same root agree far more tightly than that.
    """
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
        fx = gap(x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (fa < 0.0):
            a, fa = x, fx
        else:
            b, fb = x, fx
    return 0.5 * (a + b)


def next_plate_hit(
    flight: FlightState,
    plate: ForcingProfile,
    direction: str,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
    horizon: float | None = None,
):
    """First transversal plate contact strictly after flight.t.

    direction is FROM_ABOVE when the ball approaches the plate from above
    (gap positive before impact) and FROM_BELOW otherwise.  Returns
    ``(t_hit, plate_velocity)``.  Raises NoImpact when the flight provably
    never reaches the plate (or exhausts the horizon / step budget) and
    GrazingImpact when the located root is tangential.
    """
    if direction == FROM_ABOVE:
        sgn = 1.0
    elif direction == FROM_BELOW:
        sgn = -1.0
    else:
        raise ValueError(f"unknown direction {direction!r}")

    t0, z0, v0, g = flight.t, flight.z, flight.v, flight.g
    tol = settings.t_tol
    floor_step = 8.0 * tol

    f_lo, f_hi = plate.envelope_bounds()
    sup_df = plate.velocity_bound()
    cap = plate.step_cap()

    # probe offsets X measured from t0
    x_limit = math.inf
    if horizon is not None:
        x_limit = horizon - t0
    win = plate.window()
    if win is not None:
        x_limit = min(x_limit, win[1] - t0)
    if x_limit <= tol:
        raise NoImpact("search horizon shorter than the time tolerance")

    def zf(x):
        return z0 + v0 * x - 0.5 * g * x * x

    def gap(x):
        return zf(x) - plate.eval(t0 + x)

    x = tol
    gx = gap(x)
    if gx == 0.0 or (gx > 0.0) != (sgn > 0.0):
        raise ValueError(
            "gap sign at t + t_tol does not match the requested approach direction"
        )

    def finish(a, b, fa, fb):
        root = _refine(gap, a, b, fa, fb, tol)
        slope = (v0 - g * root) - plate.eval(t0 + root, 1)
        if abs(slope) < settings.grazing_slope_floor:
            raise GrazingImpact(
                f"contact slope {slope:.3e} below floor {settings.grazing_slope_floor:.3e}"
            )
        t_hit = t0 + root
        return t_hit, plate.eval(t_hit, 1)

    for _ in range(settings.max_bracket_steps):
        v_here = v0 - g * x
        z_here = zf(x)
        x_next = None
        if sgn > 0.0:
            if v_here > sup_df:
                # separating faster than the plate can chase
                if g == 0.0:
                    raise NoImpact("ball recedes above the plate forever (g = 0)")
                x_next = (v0 - sup_df) / g
            elif z_here > f_hi:
                # no contact while above the plate's envelope band
                x_next = _descending_crossing(z0, v0, g, f_hi)
                if x_next is None:
                    raise NoImpact("flight never descends back into the plate band")
            elif v_here < -sup_df:
                x_next = x + cap  # monotone approach, a single crossing ahead
        else:
            if v_here < -sup_df:
                raise NoImpact("ball falls away from the plate above it")
            if z_here < f_lo:
                x_next = _ascending_crossing(z0, v0, g, f_lo, x)
                if x_next is None:
                    raise NoImpact("flight apex stays below the plate band")
            elif v_here > sup_df:
                zone_end = math.inf if g == 0.0 else (v0 - sup_df) / g
                x_next = min(x + cap, max(zone_end, x + floor_step))
        if x_next is None or x_next <= x + floor_step:
            # ambiguous zone (or a jump that made no progress): Lipschitz step
            scale = abs(v_here) + sup_df + g * cap
            x_next = x + min(cap, max(floor_step, 0.9 * abs(gx) / scale))

        x_next = max(x_next, x + floor_step)
        boundary = False
        if x_next >= x_limit:
            x_next = x_limit
            boundary = True
        g_next = gap(x_next)
        if g_next == 0.0 or (g_next > 0.0) != (sgn > 0.0):
            return finish(x, x_next, gx, g_next)
        if boundary:
            raise NoImpact("no plate crossing before the search horizon")
        x, gx = x_next, g_next
    raise NoImpact("bracketing step budget exhausted")


def _descending_crossing(z0, v0, g, level):
    """Downward crossing of z(x) = level, or None if it never happens.

    A crossing at or before the caller's current offset (rounding at the
    band edge) comes back as-is; the caller then falls through to a plain
    Lipschitz step."""
    if g > 0.0:
        disc = max(v0 * v0 - 2.0 * g * (level - z0), 0.0)
        return (v0 + math.sqrt(disc)) / g
    if v0 < 0.0:
        return (level - z0) / v0
    return None


def _ascending_crossing(z0, v0, g, level, x_now):
    """Upward crossing of z(x) = level ahead of x_now; None if the flight
    can never reach the level again."""
    if g > 0.0:
        disc = v0 * v0 - 2.0 * g * (level - z0)
        if disc < 0.0:
            return None  # apex below the level
        x_up = (v0 - math.sqrt(disc)) / g
        if x_up >= x_now:
            return x_up
        x_down = (v0 + math.sqrt(disc)) / g
        if x_now <= x_down:
            return x_now  # boundary rounding; let the caller creep
        return None  # fell past the level for good
    if v0 > 0.0:
        return (level - z0) / v0
    return None
