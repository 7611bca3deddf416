"""Two-plate collision map, its factored stages, reciprocal coordinates,
the loop action invariant, and the touching-plate accelerator runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collision import (
    DEFAULT_SETTINGS,
    FROM_ABOVE,
    FROM_BELOW,
    FlightState,
    RootSolveSettings,
    next_plate_hit,
    reflect_off_plate,
)
from .errors import (
    AlternationBroken,
    BelowValidityThreshold,
    CurveInvalid,
    GrazingImpact,
    InvalidScale,
    NoImpact,
    RegionTooLarge,
)
from .forcing import PlatePair
from .records import CollisionEvent, GrowthFit, StopRule, TrajectoryRecord


@dataclass
class PhasePoint:
    """Collision-section coordinates: lower-plate hit time and outgoing speed."""

    t: float
    v: float

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError("time must be finite")
        if self.v <= 0.0:
            raise ValueError("outgoing speed must be positive")


@dataclass
class ReciprocalPoint:
    """Stretched section coordinates (t, y) with y = 2 l / v."""

    t: float
    y: float
    l: float


def validate_scale(l: float, plates: PlatePair) -> None:
    """The stretch length must dominate every plate separation."""
    bound = plates.sup_gap_bound()
    if not l > bound:
        raise InvalidScale(f"l = {l} must exceed the separation bound {bound}")


def to_reciprocal(p: PhasePoint, l: float, plates: Optional[PlatePair] = None) -> ReciprocalPoint:
    if plates is not None:
        validate_scale(l, plates)
    return ReciprocalPoint(p.t, 2.0 * l / p.v, l)


def from_reciprocal(q: ReciprocalPoint) -> PhasePoint:
    return PhasePoint(q.t, 2.0 * q.l / q.y)


def collision_map(
    p: PhasePoint,
    plates: PlatePair,
    g: float,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
):
    """One round trip of the two-plate map: (t, v) -> (t', v').

    Returns ``(PhasePoint(t', v'), (t_mid, v_mid))`` where the mid pair is
    the upper-plate hit.  The ball must reach the upper plate before
    returning to the lower one; both orderings are checked per call, and a
    violation raises BelowValidityThreshold.
    """
    f1, f2 = plates.lower, plates.upper
    t, v = p.t, p.v
    if v <= f1.eval(t, 1):
        raise ValueError("launch speed does not separate from the lower plate")
    up = FlightState(t, f1.eval(t), v, g)
    try:
        t_mid, df2 = next_plate_hit(up, f2, FROM_BELOW, settings)
    except NoImpact as exc:
        raise BelowValidityThreshold("flight cannot reach the upper plate") from exc
    _assert_no_crossing(
        up, f1, FROM_ABOVE, settings, t_mid,
        "ball returns to the lower plate before reaching the upper plate",
    )
    v_mid = -v + g * (t_mid - t) + 2.0 * df2
    down = FlightState(t_mid, f2.eval(t_mid), v_mid, g)
    t_out, df1 = next_plate_hit(down, f1, FROM_ABOVE, settings)
    _assert_no_crossing(
        down, f2, FROM_BELOW, settings, t_out,
        "upper plate catches the ball again during descent",
    )
    v_out = v + g * (t_out - 2.0 * t_mid + t) + 2.0 * df1 - 2.0 * df2
    return PhasePoint(t_out, v_out), (t_mid, v_mid)


def _assert_no_crossing(flight, plate, direction, settings, t_limit, message):
    horizon = t_limit - settings.t_tol
    try:
        next_plate_hit(flight, plate, direction, settings, horizon=horizon)
    except NoImpact:
        return
    raise BelowValidityThreshold(message)


def collision_map_factored(
    p: PhasePoint,
    plates: PlatePair,
    g: float,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
):
    """Same round trip built from its four stages.

    Stage 1 is the ascent (arrival speed at the upper plate), stage 2 the
    reflection there, stage 3 the descent, stage 4 the reflection at the
    lower plate.  Returns ``(point, mid, stages)`` with stages a tuple of
    the four (t, v) pairs; agreement with collision_map is a consistency
    check of the composite velocity formula.
    """
    f1, f2 = plates.lower, plates.upper
    t, v = p.t, p.v
    if v <= f1.eval(t, 1):
        raise ValueError("launch speed does not separate from the lower plate")
    up = FlightState(t, f1.eval(t), v, g)
    try:
        t_mid, df2 = next_plate_hit(up, f2, FROM_BELOW, settings)
    except NoImpact as exc:
        raise BelowValidityThreshold("flight cannot reach the upper plate") from exc
    _assert_no_crossing(
        up, f1, FROM_ABOVE, settings, t_mid,
        "ball returns to the lower plate before reaching the upper plate",
    )
    s1 = (t_mid, up.velocity(t_mid))
    s2 = (t_mid, reflect_off_plate(s1[1], df2))
    down = FlightState(t_mid, f2.eval(t_mid), s2[1], g)
    t_out, df1 = next_plate_hit(down, f1, FROM_ABOVE, settings)
    _assert_no_crossing(
        down, f2, FROM_BELOW, settings, t_out,
        "upper plate catches the ball again during descent",
    )
    s3 = (t_out, down.velocity(t_out))
    s4 = (t_out, reflect_off_plate(s3[1], df1))
    return PhasePoint(*s4), s2, (s1, s2, s3, s4)


def map_residuals(p, mid, p_out, plates: PlatePair, g: float):
    """Residuals of the four implicit round-trip equations at a map output."""
    f1, f2 = plates.lower, plates.upper
    t, v = p.t, p.v
    tm, vm = mid
    t2, v2 = p_out.t, p_out.v
    r1 = f2.eval(tm) - f1.eval(t) - (v * (tm - t) - 0.5 * g * (tm - t) ** 2)
    r2 = vm - (-v + g * (tm - t) + 2.0 * f2.eval(tm, 1))
    r3 = f2.eval(tm) - f1.eval(t2) - (-vm * (t2 - tm) + 0.5 * g * (t2 - tm) ** 2)
    r4 = v2 - (v + g * (t2 - 2.0 * tm + t) + 2.0 * f1.eval(t2, 1) - 2.0 * f2.eval(tm, 1))
    return r1, r2, r3, r4


def reciprocal_collision_map(
    q: ReciprocalPoint,
    plates: PlatePair,
    g: float,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
):
    """Round trip in (t, y) coordinates: conjugation of collision_map.

    Returns ``(q', psi, phi)`` where psi = (t' - t) - y is the angular
    advance defect and phi = y' - y the radial change.
    """
    validate_scale(q.l, plates)
    p = from_reciprocal(q)
    p_out, _mid = collision_map(p, plates, g, settings)
    q_out = to_reciprocal(p_out, q.l)
    psi = (p_out.t - p.t) - q.y
    phi = q_out.y - q.y
    return q_out, psi, phi


@dataclass
class ContractionEstimate:
    """Sampled bounds for the reciprocal map's defect terms."""

    c0_hat: float
    c1_hat: float
    contraction_ok: bool


def contraction_estimates(
    plates: PlatePair,
    g: float,
    l: float,
    r: float,
    samples: int = 12,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
) -> ContractionEstimate:
    """Grid maxima of |phi| / y^2, |psi| / y and |d psi / d y| for y <= r."""
    validate_scale(l, plates)
    T = plates.lower.period or plates.common_span()[1]
    c0 = 0.0
    c1 = 0.0
    dy = 1e-3 * r
    for i in range(samples):
        t = T * i / samples
        for j in range(samples):
            y = r * (j + 1) / samples
            try:
                _, psi, phi = reciprocal_collision_map(
                    ReciprocalPoint(t, y, l), plates, g, settings
                )
                y_lo = max(y - dy, 0.25 * dy)
                _, psi_lo, _ = reciprocal_collision_map(
                    ReciprocalPoint(t, y_lo, l), plates, g, settings
                )
                _, psi_hi, _ = reciprocal_collision_map(
                    ReciprocalPoint(t, y + dy, l), plates, g, settings
                )
            except BelowValidityThreshold as exc:
                raise RegionTooLarge(
                    f"map invalid at sample (t={t}, y={y}); shrink r"
                ) from exc
            c1 = max(c1, abs(phi) / (y * y))
            c0 = max(c0, abs(psi) / y, abs(psi_hi - psi_lo) / (y + dy - y_lo))
    return ContractionEstimate(c0, c1, c0 < 1.0)


# ---------------------------------------------------------------------------
# loops and the action integral


@dataclass
class LoopCurve:
    """Simple closed section curve sampled over one angular period."""

    t: np.ndarray
    v: np.ndarray
    period: float
    uniform: bool = True

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.t.shape != self.v.shape or self.t.ndim != 1:
            raise CurveInvalid("loop needs matching 1-D time and speed samples")
        if np.any(np.diff(self.t) <= 0.0):
            raise CurveInvalid("loop times must be strictly increasing")
        if self.t[-1] - self.t[0] >= self.period:
            raise CurveInvalid("loop samples must span less than one period")
        if np.any(self.v <= 0.0):
            raise CurveInvalid("loop speeds must be positive")

    @classmethod
    def from_callable(cls, fun, t0: float, period: float, n: int) -> "LoopCurve":
        ts = t0 + period * np.arange(n) / n
        return cls(ts, np.asarray([fun(t) for t in ts], dtype=float), period)

    def __len__(self):
        return len(self.t)


def _periodic_simpson(vals: np.ndarray, h: float) -> float:
    n = len(vals)
    if n % 2 != 0:
        raise CurveInvalid("periodic Simpson rule needs an even sample count")
    weights = np.where(np.arange(n) % 2 == 1, 4.0, 2.0)
    return float(h / 3.0 * np.dot(weights, vals))


def _spectral_derivative(w: np.ndarray) -> np.ndarray:
    n = len(w)
    k = np.fft.fftfreq(n, d=1.0 / n)
    return np.real(np.fft.ifft(np.fft.fft(w) * (2j * math.pi * k)))


def poincare_cartan_integral(
    curve: LoopCurve, plates: PlatePair, g: float
) -> float:
    """Loop integral of (v^2 / 2 + g f1(t) - v f1'(t)) dt.

    Composite Simpson on the periodic parametrization; halving the sample
    count must reproduce the value to 1e-8 relative or the curve is
    rejected as under-resolved.
    """
    n = len(curve)
    if n < 256:
        raise CurveInvalid("need at least 256 loop samples")
    if n % 4 != 0:
        raise CurveInvalid("sample count must be divisible by 4")
    full = _loop_integral(curve.t, curve.v, plates, g, curve.period, curve.uniform)
    half = _loop_integral(
        curve.t[::2], curve.v[::2], plates, g, curve.period, curve.uniform
    )
    if abs(full - half) > 1e-8 * max(abs(full), 1e-30):
        raise CurveInvalid("quadrature failed its sample-halving consistency check")
    return full


def _loop_integral(ts, vs, plates, g, period, uniform):
    f1 = plates.lower
    integrand = 0.5 * vs * vs + g * f1.eval(ts) - vs * f1.eval(ts, 1)
    n = len(ts)
    if uniform:
        return _periodic_simpson(integrand, period / n)
    # image curves: integrate in the source parameter s with dt = (dt/ds) ds
    w = ts - ts[0] - period * np.arange(n) / n
    dtds = period + _spectral_derivative(w)
    return _periodic_simpson(integrand * dtds, 1.0 / n)


def map_loop(
    curve: LoopCurve,
    plates: PlatePair,
    g: float,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
) -> LoopCurve:
    """Image of a loop under the round-trip map, kept on the source parameter."""
    ts = np.empty(len(curve))
    vs = np.empty(len(curve))
    for i, (t, v) in enumerate(zip(curve.t, curve.v)):
        p_out, _ = collision_map(PhasePoint(t, v), plates, g, settings)
        ts[i] = p_out.t
        vs[i] = p_out.v
    return LoopCurve(ts, vs, curve.period, uniform=False)


# ---------------------------------------------------------------------------
# touching plates: accelerated runs


def singular_run(
    plates: PlatePair,
    g: float,
    start: PhasePoint,
    stop: StopRule,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
    fit_resolution_floor: float = 100.0,
) -> TrajectoryRecord:
    """Iterate the round-trip map toward the declared plate touch.

    Records alternating upper/lower plate hits, never crossing the touch
    instant, and attaches a least-squares fit of the speed increments
    against the local contact-order model.
    """
    tang = plates.tangency
    if tang is None:
        raise ValueError("singular run needs a plate pair with a declared tangency")
    t_star, k = tang.t_star, tang.order
    if not (t_star - tang.window < start.t < t_star):
        raise ValueError("start time must lie inside the tangency window")
    model_coeff = 2.0 * (plates.lower.eval(t_star, k) - plates.upper.eval(t_star, k))

    record = TrajectoryRecord(
        model="fermi_ulam_singular",
        scenario_key="",
        context={"plates": plates, "g": g, "start": (start.t, start.v)},
    )
    launch_t = [start.t]
    launch_v = [start.v]
    t, v = start.t, start.v
    termination = "unterminated"
    guard = 10.0 * settings.t_tol
    while True:
        reason = stop.done(len(record.events), t, v)
        if reason is not None:
            termination = reason
            break
        if t >= t_star - guard:
            termination = "time_resolution_exhausted"
            break
        try:
            p_out, (t_mid, v_mid) = collision_map(PhasePoint(t, v), plates, g, settings)
        except BelowValidityThreshold as exc:
            raise AlternationBroken(
                "plate alternation failed; start speed too small"
            ) from exc
        _append_plate_hit(record, plates.upper, t_mid, v - g * (t_mid - t), v_mid)
        _append_plate_hit(record, plates.lower, p_out.t, v_mid - g * (p_out.t - t_mid), p_out.v)
        t, v = p_out.t, p_out.v
        launch_t.append(t)
        launch_v.append(v)

    record.finalize()
    record.termination = termination
    lt = np.asarray(launch_t)
    lv = np.asarray(launch_v)
    if len(lv) > 1:
        keep = np.abs(lt[:-1] - t_star) > fit_resolution_floor * settings.t_tol
        increments = np.diff(lv)[keep]
        model = model_coeff * (lt[:-1][keep] - t_star) ** (k - 1)
        denom = float(np.dot(model, model))
        slope = float(np.dot(increments, model) / denom) if denom > 0.0 else math.nan
        record.growth_fit = GrowthFit(
            slope=slope,
            model_coefficient=model_coeff,
            n_points=int(keep.sum()),
            positive_increments=bool(np.all(model > 0.0)) if len(model) else False,
        )
    return record


def _append_plate_hit(record, plate, t_hit, v_pre, v_post):
    record.events.append(
        CollisionEvent(
            kind="plate_hit",
            time=t_hit,
            bodies=("ball",),
            pre={"ball": v_pre},
            post={"ball": v_post},
            z=plate.eval(t_hit),
            plate_velocity=plate.eval(t_hit, 1),
        )
    )


# ---------------------------------------------------------------------------
# batched iteration (smooth plates), with an optional compiled fast path


@dataclass
class IterationResult:
    times: np.ndarray       # lower-plate hit times, starting after step 1
    speeds: np.ndarray      # outgoing speeds at those hits
    mid_times: np.ndarray
    mid_speeds: np.ndarray
    n_done: int
    status: str             # "ok", "below_validity", "grazing", "no_impact"


_STATUS_NAMES = {0: "ok", 1: "below_validity", 2: "grazing", 3: "no_impact"}


def iterate_map(
    p: PhasePoint,
    plates: PlatePair,
    g: float,
    n_steps: int,
    settings: RootSolveSettings = DEFAULT_SETTINGS,
    use_fast: bool = True,
) -> IterationResult:
    """Run n_steps round trips, collecting the section series.

    Uses the compiled kernel when both plates lower to harmonic form;
    otherwise falls back to the object path.
    """
    if use_fast and plates.tangency is None:
        from . import fast_kernel

        lowered = fast_kernel.lower_pair(plates)
        if lowered is not None:
            ts, vs, mts, mvs, n_done, code = fast_kernel.iterate(
                lowered, g, p.t, p.v, n_steps, settings
            )
            return IterationResult(
                ts[:n_done], vs[:n_done], mts[:n_done], mvs[:n_done],
                n_done, _STATUS_NAMES[code],
            )

    ts = np.empty(n_steps)
    vs = np.empty(n_steps)
    mts = np.empty(n_steps)
    mvs = np.empty(n_steps)
    t, v = p.t, p.v
    status = "ok"
    n_done = 0
    for i in range(n_steps):
        try:
            p_out, (tm, vm) = collision_map(PhasePoint(t, v), plates, g, settings)
        except (BelowValidityThreshold, ValueError):
            status = "below_validity"
            break
        except GrazingImpact:
            status = "grazing"
            break
        except NoImpact:
            status = "no_impact"
            break
        ts[i], vs[i], mts[i], mvs[i] = p_out.t, p_out.v, tm, vm
        t, v = p_out.t, p_out.v
        n_done = i + 1
    return IterationResult(
        ts[:n_done], vs[:n_done], mts[:n_done], mvs[:n_done], n_done, status
    )
