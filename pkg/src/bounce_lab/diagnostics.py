"""Trajectory analysis: velocity envelopes, creep-sequence experiments,
and phase-portrait extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import LeftDomain, MixedScenario, TooShort
from .records import TrajectoryRecord

_BOOTSTRAP_RESAMPLES = 500


@dataclass
class EnvelopeReport:
    window_size: int
    sup_by_window: np.ndarray
    inf_by_window: np.ndarray
    global_sup: float
    slope: float            # per event, from window suprema
    half_ratio: float       # sup over second half / sup over first half
    growth_confidence: float
    verdict: str            # bounded_evidence | growth_evidence | inconclusive


def envelope(record: TrajectoryRecord, window: int, seed: int = 0) -> EnvelopeReport:
    """Windowed speed envelope with a deterministic trend verdict.

    bounded_evidence requires the second-half supremum to stay within 5%
    of the first-half supremum; growth_evidence requires a positive trend
    slope whose sign survives 99% of seeded bootstrap resamples of the
    window suprema.  The half-ratio rule is checked first: confined
    quasi-periodic envelopes can drift by trillionths per event with a
    statistically consistent sign, and that is not growth.
    """
    if window < 8:
        raise ValueError("window must be at least 8 events")
    speeds = np.asarray(record.post_speeds, dtype=float)
    speeds = speeds[np.isfinite(speeds)]
    if len(speeds) == 0:
        raise TooShort("record holds no finite post-collision speeds")
    n_windows = len(speeds) // window
    if n_windows < 2:
        raise TooShort(f"need at least 2 windows of {window} events")

    chunks = speeds[: n_windows * window].reshape(n_windows, window)
    sups = chunks.max(axis=1)
    infs = chunks.min(axis=1)
    centers = (np.arange(n_windows) + 0.5) * window

    slope = _ols_slope(centers, sups)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n_windows, size=(_BOOTSTRAP_RESAMPLES, n_windows))
    bs = _ols_slope_rows(centers[idx], sups[idx])
    confidence = float(np.mean(bs > 0.0))

    half = len(speeds) // 2
    sup_first = float(speeds[:half].max())
    sup_second = float(speeds[half:].max())
    ratio = sup_second / sup_first if sup_first > 0.0 else math.inf

    if ratio <= 1.05:
        verdict = "bounded_evidence"
    elif slope > 0.0 and confidence >= 0.99:
        verdict = "growth_evidence"
    else:
        verdict = "inconclusive"
    return EnvelopeReport(
        window_size=window,
        sup_by_window=sups,
        inf_by_window=infs,
        global_sup=float(speeds.max()),
        slope=slope,
        half_ratio=ratio,
        growth_confidence=confidence,
        verdict=verdict,
    )


def _ols_slope(x, y):
    xm = x.mean()
    ym = y.mean()
    var = np.mean((x - xm) ** 2)
    if var == 0.0:
        return 0.0
    return float(np.mean((x - xm) * (y - ym)) / var)


def _ols_slope_rows(x, y):
    xm = x.mean(axis=1, keepdims=True)
    ym = y.mean(axis=1, keepdims=True)
    var = np.mean((x - xm) ** 2, axis=1)
    cov = np.mean((x - xm) * (y - ym), axis=1)
    return np.where(var > 0.0, cov / np.where(var > 0.0, var, 1.0), 0.0)


# ---------------------------------------------------------------------------
# creep sequences s_{n+1} = s_n + tau(s_n)


@dataclass
class CreepResult:
    sequence: np.ndarray
    partial_sums: np.ndarray    # cumulative sums of -s_n
    diverged: bool
    fit_exponent: float         # growth exponent of the partial sums


def _tau_function(kind, coefficients):
    if kind == "square":
        return lambda s: s * s
    if kind == "cubic_mix":
        return lambda s: s * s + s * s * s
    if kind == "custom":
        coeffs = tuple(float(c) for c in coefficients or ())
        if len(coeffs) < 1:
            raise ValueError("custom kind needs coefficients for s^2, s^3, ...")

        def tau(s):
            acc = 0.0
            p = s * s
            for c in coeffs:
                acc += c * p
                p *= s
            return acc

        return tau
    raise ValueError(f"unknown creep kind {kind!r}")


def creep_iterate(
    kind: str,
    s0: float,
    n: int,
    coefficients: Optional[Sequence[float]] = None,
    bound: float = 10.0,
) -> CreepResult:
    """Iterate s_{n+1} = s_n + tau(s_n) from s0 < 0 with tau(0) = tau'(0) = 0.

    tau must be positive on (s0, 0), validated by sampling.  Iterates must
    stay inside (s0 - |s0|, 0); leaving it raises LeftDomain.  The run
    diverges when the partial sums of -s_n exceed ``bound`` with a
    sub-linear (logarithmic-like) growth exponent.
    """
    if not s0 < 0.0:
        raise ValueError("s0 must be negative")
    tau = _tau_function(kind, coefficients)
    probes = -np.geomspace(1e-9, -s0, 256)
    for p in probes:
        if tau(float(p)) <= 0.0:
            raise ValueError(f"tau is not positive at s = {p}")

    delta = 2.0 * abs(s0)
    seq = np.empty(n + 1)
    seq[0] = s0
    s = s0
    for i in range(1, n + 1):
        s = s + tau(s)
        if s >= 0.0 or s <= -delta:
            raise LeftDomain(f"iterate {i} left the domain at s = {s}")
        seq[i] = s
    partials = np.cumsum(-seq)
    exponent = _tail_growth_exponent(partials)
    diverged = bool(partials[-1] > bound and exponent < 0.5)
    return CreepResult(seq, partials, diverged, exponent)


def _tail_growth_exponent(partials):
    n = len(partials)
    if n < 100:
        return math.nan
    ks = np.unique(np.geomspace(n // 10, n - 1, 32).astype(int))
    x = np.log(ks.astype(float))
    y = np.log(partials[ks])
    return _ols_slope(x, y)


# ---------------------------------------------------------------------------
# phase portraits


def phase_portrait(records: Sequence[TrajectoryRecord], coords: str = "tv",
                   l: Optional[float] = None):
    """Rows (trajectory_id, event_index, t mod T, value) for external plotting.

    coords "tv" emits the post-collision speed, "ty" the stretched radius
    y = 2 l / v (which needs ``l``).  All records must come from one
    scenario.
    """
    if coords not in ("tv", "ty"):
        raise ValueError("coords must be 'tv' or 'ty'")
    keys = {r.scenario_key for r in records}
    if len(keys) > 1:
        raise MixedScenario(f"records span {len(keys)} scenarios")
    if coords == "ty":
        if l is None or l <= 0.0:
            raise ValueError("ty coordinates need a positive stretch length l")
        plates = records[0].context.get("plates") if records else None
        if plates is not None:
            from .fermi_ulam import validate_scale

            validate_scale(l, plates)
    rows = []
    for traj_id, rec in enumerate(records):
        period = _record_period(rec)
        for i, (t, v) in enumerate(zip(rec.times, rec.post_speeds)):
            if not np.isfinite(v):
                continue
            value = v if coords == "tv" else 2.0 * l / v
            rows.append((traj_id, i, float(t % period), float(value)))
    return rows


def _record_period(rec):
    ctx = rec.context
    plate = ctx.get("plate")
    if plate is not None and plate.period:
        return plate.period
    plates = ctx.get("plates")
    if plates is not None and plates.lower.period:
        return plates.lower.period
    return 1.0
