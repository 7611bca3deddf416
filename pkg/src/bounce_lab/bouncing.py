"""Ball-above-plate dynamics: the one-ball return map, resonant launches,
the two-ball event-driven engine, and the promotion of a periodic orbit to
an upper plate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collision import (
    DEFAULT_SETTINGS,
    FROM_ABOVE,
    FlightState,
    RootSolveSettings,
    ball_ball_collide,
    next_plate_hit,
    reflect_off_plate,
)
from .errors import (
    EventStorm,
    NoImpact,
    NonReturn,
    NotPeriodic,
    ProfileError,
    ResonanceBroken,
    TripleCollision,
)
from .fermi_ulam import PhasePoint
from .forcing import ForcingProfile, ParabolicArcs, PlatePair, Tangency
from .records import CollisionEvent, StopRule, TrajectoryRecord, scenario_fingerprint

_GRID = 4096


@dataclass
class BallState:
    """Instantaneous ball data at the simulation start time."""

    mass: float
    z: float
    v: float
    label: str

    def __post_init__(self):
        if self.mass < 0.0:
            raise ValueError("mass must be nonnegative")


def one_ball_map(
    p: PhasePoint,
    plate: ForcingProfile,
    g: float,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
) -> PhasePoint:
    """Plate-launch to next plate-launch map for a single ball.

    t' is the first transversal return to the plate and
    v' = g (t' - t) - v + 2 f'(t').
    """
    if p.v <= plate.eval(p.t, 1):
        raise ValueError("launch speed does not separate from the plate")
    flight = FlightState(p.t, plate.eval(p.t), p.v, g)
    try:
        t_out, df = next_plate_hit(flight, plate, FROM_ABOVE, settings)
    except NoImpact as exc:
        if g == 0.0:
            raise NonReturn("ball escapes the plate with g = 0") from exc
        raise
    v_out = g * (t_out - p.t) - p.v + 2.0 * df
    return PhasePoint(t_out, v_out)


# ---------------------------------------------------------------------------
# resonant launches


def slope_time(plate: ForcingProfile, target: float, tol: float = 1e-12) -> Optional[float]:
    """First t0 in [0, T) with f'(t0) = target, by grid bracketing + bisection."""
    if plate.period is None:
        raise ProfileError("slope search requires a periodic profile")
    T = plate.period
    ts = np.linspace(0.0, T, _GRID + 1)
    d = plate.eval(ts, 1) - target
    exact = np.flatnonzero(d == 0.0)
    flips = np.flatnonzero(d[:-1] * d[1:] < 0.0)
    best = None
    if exact.size:
        best = float(ts[exact[0]])
    if flips.size:
        i = int(flips[0])
        a, b, fa, fb = ts[i], ts[i + 1], d[i], d[i + 1]
        for _ in range(200):
            if b - a < tol:
                break
            m = 0.5 * (a + b)
            fm = plate.eval(m, 1) - target
            if fm == 0.0:
                a = b = m
                break
            if (fa < 0.0) != (fm < 0.0):
                b, fb = m, fm
            else:
                a, fa = m, fm
        root = 0.5 * (a + b)
        if best is None or root < best:
            best = float(root)
    return best if best is None or best < T else best % T


@dataclass
class ResonantSpec:
    """Launch data for the two synchronized plate orbits.

    variant "steady" launches where the plate is instantaneously at rest
    (constant speed, fixed hop length); variant "accelerating" launches
    where the plate velocity equals T g / 2, gaining T g per hop.
    period_multiple is the launch hop length in plate periods.
    """

    variant: str
    period_multiple: int
    t0: float

    def __post_init__(self):
        if self.variant not in ("steady", "accelerating"):
            raise ValueError("variant must be 'steady' or 'accelerating'")
        if self.period_multiple < 1:
            raise ValueError("period_multiple must be a positive integer")

    @classmethod
    def locate(cls, plate: ForcingProfile, g: float, variant: str,
               period_multiple: int) -> "ResonantSpec":
        target = 0.0 if variant == "steady" else plate.period * g / 2.0
        t0 = slope_time(plate, target)
        if t0 is None:
            raise ResonanceBroken(
                f"plate velocity never reaches the target {target}"
            )
        if abs(plate.eval(t0, 1) - target) > 1e-10:
            raise ResonanceBroken("anchor root failed its slope tolerance")
        return cls(variant, period_multiple, t0)

    def launch_speed(self, plate: ForcingProfile, g: float) -> float:
        return plate.period * g * self.period_multiple / 2.0


def build_resonant(
    spec: ResonantSpec,
    plate: ForcingProfile,
    g: float,
    n_hops: int,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
    tol: float = 1e-8,
) -> TrajectoryRecord:
    """Verify the resonant hop pattern link by link.

    Steady: constant speed v0 and hop length T m.  Accelerating: speed
    v0 + (n+1) T g after hop n and hop length T (m + 2 n).  Every hop is
    launched from the ideal pattern state and the map output is compared
    against the next pattern state; the per-hop deviations are recorded.
    (The resonant orbit is exponentially unstable, with a round-trip
    Jacobian of order 2 A omega^2 / g per hop, so chaining the computed
    outputs would amplify the anchor's last floating-point bit past any
    tolerance within a dozen hops; link-wise validation is the meaningful
    finite-precision statement.)

    Exceeding ``tol`` raises ResonanceBroken with the offending hop index;
    that usually signals a period multiple too small for the arcs to clear
    the plate.
    """
    T = plate.period
    v0 = spec.launch_speed(plate, g)
    if v0 <= plate.eval(spec.t0, 1):
        raise ResonanceBroken(
            "launch speed does not separate from the plate; period multiple too small",
            hop_index=0,
        )
    record = TrajectoryRecord(
        model="one_ball",
        scenario_key=scenario_fingerprint(
            {"model": "one_ball", "plate": plate.describe(), "g": g,
             "variant": spec.variant, "m": spec.period_multiple}
        ),
        context={"plate": plate, "g": g, "t0": spec.t0, "v0": v0},
    )
    devs = []
    t, v = spec.t0, v0
    for n in range(n_hops):
        p_out = one_ball_map(PhasePoint(t, v), plate, g, settings)
        if spec.variant == "steady":
            next_v = v0
            next_t = t + T * spec.period_multiple
        else:
            next_v = v0 + (n + 1) * T * g
            next_t = t + T * (spec.period_multiple + 2 * n)
        dev = max(abs(p_out.v - next_v), abs(p_out.t - next_t))
        if dev > tol:
            raise ResonanceBroken(
                f"hop {n} deviates by {dev:.3e}", hop_index=n, deviation=dev
            )
        devs.append(dev)
        record.events.append(
            CollisionEvent(
                kind="plate_hit",
                time=p_out.t,
                bodies=("ball",),
                pre={"ball": v - g * (p_out.t - t)},
                post={"ball": p_out.v},
                z=plate.eval(p_out.t),
                plate_velocity=plate.eval(p_out.t, 1),
            )
        )
        t, v = next_t, next_v
    record.finalize()
    record.termination = "n_events"
    record.deviations = np.asarray(devs)
    return record


def solo_ball_run(
    plate: ForcingProfile,
    g: float,
    t0: float,
    z0: float,
    v0: float,
    horizon: Optional[float] = None,
    n_events: Optional[int] = None,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
):
    """Plate-hit list [(t, v_pre, v_post), ...] for one ball from mid-air."""
    hits = []
    anchor = FlightState(t0, z0, v0, g)
    while True:
        if n_events is not None and len(hits) >= n_events:
            break
        try:
            t_hit, df = next_plate_hit(anchor, plate, FROM_ABOVE, settings,
                                       horizon=horizon)
        except NoImpact:
            break
        v_pre = anchor.velocity(t_hit)
        v_post = reflect_off_plate(v_pre, df)
        hits.append((t_hit, v_pre, v_post))
        anchor = FlightState(t_hit, plate.eval(t_hit), v_post, g)
    return hits


# ---------------------------------------------------------------------------
# two-ball event engine


class _Body:
    __slots__ = ("label", "mass", "anchor", "active", "plate_candidate")

    def __init__(self, label, mass, anchor):
        self.label = label
        self.mass = mass
        self.anchor = anchor
        self.active = True
        self.plate_candidate = None  # lazy (t_hit, df) or "none"


def two_ball_simulate(
    balls,
    plate: ForcingProfile,
    g: float,
    stop: StopRule,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
    t0: float = 0.0,
    max_events: int = 10**7,
) -> TrajectoryRecord:
    """Event-driven run of two elastic balls above one oscillating plate.

    Candidate events are the lower ball's plate hit (root-found) and the
    ball-ball contact (closed form, since the relative motion is linear in
    time).  A coincidence of the two within 10 t_tol is a triple collision:
    fatal with a massive lower ball, regularized when the lower ball is
    massless (the massless ball is retired with a marker event and the
    massive ball continues through its own plate bounces).  Plate-hit
    candidates are cached per flight anchor, so a ball whose state a
    collision left untouched keeps its previously computed trajectory
    bit for bit.
    """
    low_in, up_in = balls
    if low_in.z > up_in.z:
        low_in, up_in = up_in, low_in
    if low_in.mass == 0.0 and up_in.mass == 0.0:
        raise ValueError("at most one ball may be massless")
    if plate.eval(t0) > low_in.z:
        raise ValueError("lower ball starts below the plate")

    low = _Body(low_in.label, low_in.mass, FlightState(t0, low_in.z, low_in.v, g))
    up = _Body(up_in.label, up_in.mass, FlightState(t0, up_in.z, up_in.v, g))

    record = TrajectoryRecord(
        model="two_ball",
        scenario_key=scenario_fingerprint(
            {"model": "two_ball", "plate": plate.describe(), "g": g,
             "balls": [(b.label, b.mass, b.z, b.v) for b in (low_in, up_in)],
             "t0": t0}
        ),
        context={
            "plate": plate,
            "g": g,
            "t0": t0,
            "masses": {low_in.label: low_in.mass, up_in.label: up_in.mass},
            "initial": {low_in.label: (low_in.z, low_in.v),
                        up_in.label: (up_in.z, up_in.v)},
        },
    )

    window = 10.0 * settings.t_tol
    t_now = t0
    termination = "no_further_events"

    def plate_hit_for(body):
        if body.plate_candidate is None:
            try:
                body.plate_candidate = next_plate_hit(
                    body.anchor, plate, FROM_ABOVE, settings
                )
            except NoImpact:
                body.plate_candidate = "none"
        return None if body.plate_candidate == "none" else body.plate_candidate

    def ball_ball_time():
        if not (low.active and up.active):
            return None
        d = up.anchor.height(t_now) - low.anchor.height(t_now)
        closing = low.anchor.velocity(t_now) - up.anchor.velocity(t_now)
        if closing <= 0.0:
            return None
        return t_now + max(d, 0.0) / closing

    while True:
        if len(record.events) > max_events:
            raise EventStorm(f"more than {max_events} events")

        candidates = []
        if low.active:
            c = plate_hit_for(low)
            if c is not None:
                candidates.append((c[0], "plate_low"))
        if up.active and (not low.active or low.mass == 0.0):
            c = plate_hit_for(up)
            if c is not None:
                candidates.append((c[0], "plate_up"))
        t_bb = ball_ball_time()
        if t_bb is not None:
            candidates.append((t_bb, "ball_ball"))
        if not candidates:
            termination = "no_further_events"
            break
        candidates.sort()
        t_evt, kind = candidates[0]

        if stop.horizon_time is not None and t_evt > stop.horizon_time:
            termination = "horizon_time"
            break

        # triple: plate and ball-ball candidates inside the coincidence window
        plate_times = [tc for tc, k in candidates if k.startswith("plate")]
        is_triple = (
            t_bb is not None
            and plate_times
            and min(abs(tc - t_bb) for tc in plate_times) < window
        )
        # a collapsing event cascade is the same coincidence seen in sequence
        if not is_triple and low.active and low.mass == 0.0 and record.events:
            is_triple = (t_evt - t_now) < window
        if is_triple:
            z_here = low.anchor.height(t_bb if t_bb is not None else t_evt)
            triple_event = CollisionEvent(
                kind="triple",
                time=t_evt,
                bodies=(low.label, up.label),
                pre={low.label: low.anchor.velocity(t_evt),
                     up.label: up.anchor.velocity(t_evt)},
                post={},
                z=z_here,
            )
            if low.active and low.mass == 0.0:
                record.events.append(triple_event)
                record.context["zero_mass_singularity_at"] = t_evt
                low.active = False
                t_now = t_evt
                continue
            record.events.append(triple_event)
            record.finalize()
            record.termination = "triple_collision"
            raise TripleCollision(
                "plate and ball-ball impacts coincide with a massive lower ball",
                record=record,
            )

        max_speed = 0.0
        if kind == "ball_ball":
            z_evt = low.anchor.height(t_evt)
            v1 = low.anchor.velocity(t_evt)
            v2 = up.anchor.velocity(t_evt)
            p1, p2 = ball_ball_collide(low.mass, v1, up.mass, v2)
            record.events.append(
                CollisionEvent(
                    kind="ball_ball",
                    time=t_evt,
                    bodies=(low.label, up.label),
                    pre={low.label: v1, up.label: v2},
                    post={low.label: p1, up.label: p2},
                    z=z_evt,
                )
            )
            if low.mass == up.mass:
                # exact velocity exchange: the bodies trade whole flight
                # parabolas, so swap anchors (and caches) instead of
                # re-anchoring; downstream root solves stay bit-identical
                # to the non-interacting relabeled flights
                low.anchor, up.anchor = up.anchor, low.anchor
                low.plate_candidate, up.plate_candidate = (
                    up.plate_candidate, low.plate_candidate,
                )
            else:
                if p1 != v1:
                    low.anchor = FlightState(t_evt, low.anchor.height(t_evt), p1, g)
                    low.plate_candidate = None
                if p2 != v2:
                    up.anchor = FlightState(t_evt, up.anchor.height(t_evt), p2, g)
                    up.plate_candidate = None
            max_speed = max(abs(p1), abs(p2))
        else:
            body = low if kind == "plate_low" else up
            t_hit, df = body.plate_candidate
            v_pre = body.anchor.velocity(t_hit)
            v_post = reflect_off_plate(v_pre, df)
            record.events.append(
                CollisionEvent(
                    kind="plate_hit",
                    time=t_hit,
                    bodies=(body.label,),
                    pre={body.label: v_pre},
                    post={body.label: v_post},
                    z=plate.eval(t_hit),
                    plate_velocity=df,
                )
            )
            body.anchor = FlightState(t_hit, plate.eval(t_hit), v_post, g)
            body.plate_candidate = None
            max_speed = abs(v_post)

        t_now = t_evt
        reason = stop.done(len(record.events), t_now, max_speed)
        if reason is not None:
            termination = reason
            break

    record.finalize()
    record.termination = termination
    return record


# ---------------------------------------------------------------------------
# equal-mass exchange equivalence


@dataclass
class EquivalenceReport:
    max_time_dev: float
    max_speed_dev: float
    n_compared: int
    kind_mismatches: int


def equal_mass_equivalence_check(
    record: TrajectoryRecord,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
) -> EquivalenceReport:
    """Compare an equal-mass two-ball record against two independent
    single-ball runs whose labels swap at every crossing.

    Equal-mass collisions exchange velocities, so the pair of physical
    trajectories coincides with two non-interacting flights; record event
    times and the per-event velocity multiset must match theirs.
    """
    ctx = record.context
    masses = list(ctx["masses"].values())
    if masses[0] != masses[1]:
        raise ValueError("equivalence check needs equal masses")
    plate, g, t0 = ctx["plate"], ctx["g"], ctx["t0"]
    horizon = float(record.times[-1]) + 1e-9 if record.n_events else t0

    flights = []
    for label, (z, v) in ctx["initial"].items():
        flights.append(_phantom_path(plate, g, t0, z, v, horizon, settings))

    expected = []
    for path in flights:
        for (t_hit, v_pre, v_post) in path["hits"]:
            expected.append((t_hit, "plate_hit", (abs(v_post),)))
    for (t_x, va, vb) in _phantom_crossings(flights, g, t0, horizon):
        expected.append((t_x, "ball_ball", tuple(sorted((abs(va), abs(vb))))))
    expected.sort()

    got = []
    for e in record.events:
        if e.kind == "plate_hit":
            got.append((e.time, "plate_hit", (abs(next(iter(e.post.values()))),)))
        elif e.kind == "ball_ball":
            got.append((e.time, "ball_ball", tuple(sorted(abs(v) for v in e.post.values()))))
    got.sort()

    n = min(len(expected), len(got))
    max_t = 0.0
    max_v = 0.0
    mismatches = abs(len(expected) - len(got))
    for (te, ke, ve), (tg, kg, vg) in zip(expected[:n], got[:n]):
        max_t = max(max_t, abs(te - tg))
        if ke != kg:
            mismatches += 1
            continue
        for a, b in zip(ve, vg):
            max_v = max(max_v, abs(a - b))
    return EquivalenceReport(max_t, max_v, n, mismatches)


def _phantom_path(plate, g, t0, z0, v0, horizon, settings):
    hits = solo_ball_run(plate, g, t0, z0, v0, horizon=horizon, settings=settings)
    anchors = [(t0, z0, v0)]
    for (t_hit, _pre, v_post) in hits:
        anchors.append((t_hit, plate.eval(t_hit), v_post))
    return {"hits": hits, "anchors": anchors}


def _phantom_crossings(flights, g, t0, horizon):
    """Height coincidences of the two phantom paths (relative motion is
    piecewise linear between the merged plate-hit times)."""
    fa, fb = flights
    breaks = sorted(
        {t0, horizon}
        | {t for (t, _, _) in fa["hits"]}
        | {t for (t, _, _) in fb["hits"]}
    )
    crossings = []
    for lo, hi in zip(breaks, breaks[1:]):
        if hi - lo < 1e-13:
            continue
        sa = _state_on_path(fa, lo, g)
        sb = _state_on_path(fb, lo, g)
        dz = sa[0] - sb[0]
        dv = sa[1] - sb[1]
        if dv == 0.0:
            continue
        dt = -dz / dv
        if 1e-12 < dt <= hi - lo:
            t_x = lo + dt
            va = sa[1] - g * dt
            vb = sb[1] - g * dt
            crossings.append((t_x, va, vb))
    return crossings


def _state_on_path(path, t, g):
    anchors = path["anchors"]
    idx = 0
    for i, (ta, _, _) in enumerate(anchors):
        if ta <= t + 1e-15:
            idx = i
    ta, za, va = anchors[idx]
    dt = t - ta
    return (za + va * dt - 0.5 * g * dt * dt, va - g * dt)


# ---------------------------------------------------------------------------
# periodic orbit promoted to an upper plate


def orbit_as_upper_plate(
    p2_record: TrajectoryRecord,
    plate: ForcingProfile,
    g: float,
    tol: float = 1e-9,
) -> PlatePair:
    """Plate pair whose upper profile traces a ball's periodic flight arcs.

    The record must hold the ball's plate hits with a period that is an
    integer multiple of the plate period (checked to ``tol``, else
    NotPeriodic).  The pair carries the tangency at the arc landing
    instant, with the contact order read from the velocity mismatch.
    """
    hits = [e for e in p2_record.events if e.kind == "plate_hit"]
    if len(hits) < 2:
        raise NotPeriodic("need at least two plate hits to detect a period")
    times = np.asarray([e.time for e in hits])
    posts = np.asarray([next(iter(e.post.values())) for e in hits])
    period = float(times[1] - times[0])
    ratio = period / plate.period
    if abs(ratio - round(ratio)) > tol or round(ratio) < 1:
        raise NotPeriodic("orbit period is not an integer multiple of the plate period")
    for j in range(len(hits) - 1):
        if abs(times[j + 1] - times[j] - period) > tol or abs(posts[j + 1] - posts[j]) > tol:
            raise NotPeriodic(f"hit {j + 1} breaks the periodic pattern")

    t_ref = float(times[0])
    v_launch = float(posts[0])
    arcs = ParabolicArcs(
        anchors=((0.0, plate.eval(t_ref), v_launch),),
        period=period,
        accel=g,
        t_ref=t_ref,
    )
    t_star = t_ref + period
    landing_speed = arcs.eval(t_star, 1)  # left-arc convention
    order = 1 if abs(landing_speed - plate.eval(t_star, 1)) > 1e-8 else 2
    pair = PlatePair(
        lower=plate,
        upper=arcs,
        tangency=Tangency(t_star, order, 0.99 * period),
    )
    pair.verify()
    return pair


# ---------------------------------------------------------------------------
# paired resonant launch states


def paired_resonant_states(
    plate: ForcingProfile,
    g: float,
    period_multiple: int,
    mode: str,
    offset_periods: int = 1,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
):
    """Two-ball initial states built from the resonant launches.

    mode "both_accelerating": one ball launches on the accelerating anchor
    and the other launched the same way ``offset_periods`` plate periods
    earlier, realized mid-flight.  mode "mixed": an accelerating launch
    paired with a steady orbit.  Returns ``(lower, upper, t_start)``.
    """
    T = plate.period
    acc = ResonantSpec.locate(plate, g, "accelerating", period_multiple)
    v0 = acc.launch_speed(plate, g)
    if mode == "both_accelerating":
        t_start = acc.t0 + offset_periods * T
        dt = offset_periods * T
        z_mid = plate.eval(acc.t0) + v0 * dt - 0.5 * g * dt * dt
        v_mid = v0 - g * dt
        if z_mid <= plate.eval(t_start):
            raise ValueError("offset leaves the early ball below the plate")
        lower = BallState(1.0, plate.eval(t_start), v0, "P2")
        upper = BallState(1.0, z_mid, v_mid, "P1")
        return lower, upper, t_start
    if mode == "mixed":
        steady = ResonantSpec.locate(plate, g, "steady", period_multiple)
        hop = T * period_multiple
        t_start = acc.t0 if acc.t0 >= steady.t0 else acc.t0 + T * math.ceil(
            (steady.t0 - acc.t0) / T
        )
        # steady orbit anchor at or before t_start, shifted by whole hops
        t_launch = steady.t0 + hop * math.floor((t_start - steady.t0) / hop)
        dt = t_start - t_launch
        z_mid = plate.eval(t_launch) + v0 * dt - 0.5 * g * dt * dt
        v_mid = v0 - g * dt
        if abs(dt) < 1e-12:
            z_mid = plate.eval(t_launch)
            v_mid = v0
        if z_mid < plate.eval(t_start) - 1e-12:
            raise ValueError("steady orbit realization fell below the plate")
        at_plate = BallState(1.0, plate.eval(t_start), v0, "P1")
        mid_air = BallState(1.0, z_mid, v_mid, "P2")
        if z_mid >= at_plate.z:
            return at_plate, mid_air, t_start
        return mid_air, at_plate, t_start
    raise ValueError(f"unknown mode {mode!r}")
