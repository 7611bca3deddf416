"""Independent fixed-step integrator with dense event detection.

Ground truth for cross-validating the event-driven engines.  Bodies fly on
exact parabolas; every gap function is sampled on a fixed grid (numpy
chunks), each sign change is refined by plain bisection far below the
engines' time tolerance, and the shared collision laws are applied.  Event
*location* is deliberately independent code: the engines march adaptively,
the oracle scans densely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collision import FlightState, ball_ball_collide, reflect_off_plate
from .errors import EventStorm, TripleCollision
from .records import CollisionEvent, TrajectoryRecord


@dataclass
class OracleSettings:
    h: Optional[float] = None      # grid step; defaults to 1e-6 * plate period
    refine_iters: int = 60
    max_events: int = 10**7
    chunk: int = 65536


def oracle_run(scenario, horizon: float, settings: Optional[OracleSettings] = None
               ) -> TrajectoryRecord:
    """Advance a scenario to ``horizon`` on a fixed grid, refining events.

    Produces a record in the same schema as the event-driven engines.
    Raises EventStorm past ``settings.max_events``.
    """
    settings = settings or OracleSettings()
    bodies, gaps, base_period, model = _normalize(scenario)
    h = settings.h if settings.h is not None else 1e-6 * base_period
    t_tol = scenario.tolerances.t_tol
    if h < t_tol:
        raise ValueError("oracle step h below t_tol makes refinement meaningless")
    window = 10.0 * t_tol

    record = TrajectoryRecord(
        model=model,
        scenario_key=scenario.fingerprint(),
        context={"oracle": True, "g": scenario.g},
    )
    g = scenario.g
    t_cur = bodies[0].anchor.t
    offsets = h * np.arange(1, settings.chunk + 1)
    last_event_time = None

    while t_cur < horizon:
        if len(record.events) >= settings.max_events:
            raise EventStorm(f"oracle exceeded {settings.max_events} events")
        ts = t_cur + offsets
        if ts[-1] > horizon:
            ts = ts[ts <= horizon]
            if len(ts) == 0:
                break
        hit = _first_flip(gaps, bodies, ts, t_cur, h)
        if hit is None:
            t_cur = float(ts[-1])
            continue
        candidates = [
            (_refine_bisect(gaps[j], bodies, a, b, settings.refine_iters), j)
            for (j, a, b) in hit
        ]
        candidates.sort()
        t_evt, j_evt = candidates[0]
        coincident = len(candidates) > 1 and candidates[1][0] - t_evt < window
        cascade = (
            last_event_time is not None
            and t_evt - last_event_time < window
            and _zero_mass_lower(gaps, bodies)
        )
        if coincident or cascade:
            _handle_triple(record, bodies, gaps, t_evt)
            last_event_time = t_evt
            t_cur = t_evt
            continue
        _apply_event(record, bodies, gaps[j_evt], t_evt, g)
        last_event_time = t_evt
        t_cur = t_evt
    record.finalize()
    record.termination = "horizon_time"
    return record


class _OracleBody:
    __slots__ = ("label", "mass", "anchor", "active")

    def __init__(self, label, mass, anchor):
        self.label = label
        self.mass = mass
        self.anchor = anchor
        self.active = True


def _normalize(scenario):
    """Bodies and gap functions for the scenario's model."""
    model = scenario.model
    g = scenario.g
    if model in ("fermi_ulam", "fermi_ulam_singular"):
        plates = scenario.build_plates()
        t0, v0 = scenario.initial["t"], scenario.initial["v"]
        body = _OracleBody("ball", 1.0, FlightState(t0, plates.lower.eval(t0), v0, g))
        gaps = [
            ("plate", 0, plates.lower),
            ("plate", 0, plates.upper),
        ]
        return [body], gaps, plates.lower.period or 1.0, model
    if model == "one_ball":
        plate = scenario.build_plate()
        t0, v0 = scenario.initial["t"], scenario.initial["v"]
        body = _OracleBody("ball", 1.0, FlightState(t0, plate.eval(t0), v0, g))
        return [body], [("plate", 0, plate)], plate.period, model
    if model in ("two_ball", "restricted_case1", "restricted_case2"):
        plate = scenario.build_plate()
        t0 = scenario.initial["t"]
        states = scenario.initial["balls"]
        states = sorted(states, key=lambda b: b.z)
        bodies = [
            _OracleBody(b.label, b.mass, FlightState(t0, b.z, b.v, g)) for b in states
        ]
        gaps = [("plate", 0, plate), ("pair", 0, 1)]
        if bodies[0].mass == 0.0:
            gaps.append(("plate", 1, plate))
        return bodies, gaps, plate.period, model
    raise ValueError(f"oracle does not support model {model!r}")


def _gap_values(gap, bodies, ts):
    if gap[0] == "plate":
        body = bodies[gap[1]]
        if not body.active:
            return None
        return body.anchor.height(ts) - gap[2].eval(ts)
    lo, hi = bodies[gap[1]], bodies[gap[2]]
    if not (lo.active and hi.active):
        return None
    return hi.anchor.height(ts) - lo.anchor.height(ts)


def _gap_scalar(gap, bodies, t):
    vals = _gap_values(gap, bodies, np.asarray([t]))
    return float(vals[0])


def _first_flip(gaps, bodies, ts, t_cur, h):
    """Earliest sign change per gap inside the chunk, or None.

    Returns a list of (gap_index, bracket_lo, bracket_hi) for every gap
    whose first flip happens at the overall earliest grid index.
    """
    t_ref = t_cur + 1e-3 * h
    best = None
    flips = {}
    for j, gap in enumerate(gaps):
        ref = _gap_scalar_checked(gap, bodies, t_ref)
        if ref is None:
            continue
        vals = _gap_values(gap, bodies, ts)
        mask = vals * np.sign(ref) <= 0.0
        idx = np.flatnonzero(mask)
        if idx.size:
            i = int(idx[0])
            flips[j] = i
            if best is None or i < best:
                best = i
    if best is None:
        return None
    out = []
    for j, i in flips.items():
        if i == best:
            a = t_cur + 1e-3 * h if i == 0 else float(ts[i - 1])
            out.append((j, a, float(ts[i])))
    return out


def _gap_scalar_checked(gap, bodies, t):
    vals = _gap_values(gap, bodies, np.asarray([t]))
    if vals is None:
        return None
    v = float(vals[0])
    return v if v != 0.0 else None


def _refine_bisect(gap, bodies, a, b, iters):
    fa = _gap_scalar(gap, bodies, a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = _gap_scalar(gap, bodies, m)
        if fm == 0.0:
            return m
        if (fm < 0.0) == (fa < 0.0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _zero_mass_lower(gaps, bodies):
    return len(bodies) == 2 and bodies[0].active and bodies[0].mass == 0.0


def _apply_event(record, bodies, gap, t_evt, g):
    if gap[0] == "plate":
        body = bodies[gap[1]]
        plate = gap[2]
        v_pre = body.anchor.velocity(t_evt)
        df = plate.eval(t_evt, 1)
        v_post = reflect_off_plate(v_pre, df)
        record.events.append(
            CollisionEvent(
                kind="plate_hit",
                time=t_evt,
                bodies=(body.label,),
                pre={body.label: v_pre},
                post={body.label: v_post},
                z=plate.eval(t_evt),
                plate_velocity=df,
            )
        )
        body.anchor = FlightState(t_evt, plate.eval(t_evt), v_post, g)
        return
    lo, hi = bodies[gap[1]], bodies[gap[2]]
    v1 = lo.anchor.velocity(t_evt)
    v2 = hi.anchor.velocity(t_evt)
    p1, p2 = ball_ball_collide(lo.mass, v1, hi.mass, v2)
    z_evt = lo.anchor.height(t_evt)
    record.events.append(
        CollisionEvent(
            kind="ball_ball",
            time=t_evt,
            bodies=(lo.label, hi.label),
            pre={lo.label: v1, hi.label: v2},
            post={lo.label: p1, hi.label: p2},
            z=z_evt,
        )
    )
    if p1 != v1:
        lo.anchor = FlightState(t_evt, lo.anchor.height(t_evt), p1, g)
    if p2 != v2:
        hi.anchor = FlightState(t_evt, hi.anchor.height(t_evt), p2, g)


def _handle_triple(record, bodies, gaps, t_evt):
    labels = tuple(b.label for b in bodies if b.active)
    pres = {b.label: b.anchor.velocity(t_evt) for b in bodies if b.active}
    z = bodies[0].anchor.height(t_evt)
    event = CollisionEvent(
        kind="triple", time=t_evt, bodies=labels, pre=pres, post={}, z=z
    )
    record.events.append(event)
    if len(bodies) == 2 and bodies[0].mass == 0.0:
        record.context["zero_mass_singularity_at"] = t_evt
        bodies[0].active = False
        return
    record.finalize()
    record.termination = "triple_collision"
    raise TripleCollision("oracle: coincident plate and pair impacts", record=record)
