"""Built-in acceptance suite.

Each criterion is a function returning (passed, detail); the registry is
shared by ``bounce-lab validate`` and the pytest suite so there is exactly
one definition of the release gate.  Criteria declare the modules they
need; a missing module marks them skipped (and the run failed) rather than
silently passing.
"""

from __future__ import annotations

import importlib
import math
import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .bouncing import (
    BallState,
    ResonantSpec,
    build_resonant,
    orbit_as_upper_plate,
    two_ball_simulate,
)
from .collision import RootSolveSettings, ball_ball_collide
from .diagnostics import creep_iterate, envelope
from .errors import CurveInvalid
from .fermi_ulam import (
    LoopCurve,
    PhasePoint,
    collision_map,
    iterate_map,
    map_loop,
    poincare_cartan_integral,
    singular_run,
)
from .forcing import (
    ConstantProfile,
    PlatePair,
    PolynomialWindow,
    SinusoidProfile,
    Tangency,
)
from .records import StopRule


def criterion_resonant_acceleration(t_tol: float = 1e-11):
    plate = SinusoidProfile(0.5, 1.0)
    settings = RootSolveSettings(t_tol=t_tol)
    spec = ResonantSpec.locate(plate, 2.0, "accelerating", 3)
    rec = build_resonant(spec, plate, 2.0, 100, settings, tol=1e-8)
    dev = float(rec.deviations.max())
    return dev <= 1e-8, f"100 hops, worst pattern deviation {dev:.2e}"


def criterion_steady_orbit(t_tol: float = 1e-11):
    plate = SinusoidProfile(0.5, 1.0)
    settings = RootSolveSettings(t_tol=t_tol)
    spec = ResonantSpec.locate(plate, 2.0, "steady", 3)
    rec = build_resonant(spec, plate, 2.0, 1000, settings, tol=1e-8)
    dev = float(rec.deviations.max())
    return dev <= 1e-8, f"1000 hops, worst pattern deviation {dev:.2e}"


def criterion_loop_invariant(t_tol: float = 1e-11):
    plates = PlatePair(SinusoidProfile(0.02, 1.0), SinusoidProfile(0.02, 1.0, 0.9, 1.0))
    g = 2.0
    settings = RootSolveSettings(t_tol=t_tol)
    gap = 1.0
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(10):
        amps = rng.uniform(0.01, 0.04, 3)
        phases = rng.uniform(0.0, 2.0 * math.pi, 3)

        def vfun(t):
            s = 1.0
            for j in range(3):
                s += amps[j] * math.cos(2.0 * math.pi * (j + 1) * t + phases[j])
            return 100.0 * gap * s

        curve = LoopCurve.from_callable(vfun, 0.0, 1.0, 1024)
        base = poincare_cartan_integral(curve, plates, g)
        try:
            image = map_loop(curve, plates, g, settings)
            mapped = poincare_cartan_integral(image, plates, g)
        except CurveInvalid as exc:
            return False, f"image loop rejected: {exc}"
        worst = max(worst, abs(mapped - base) / abs(base))
    return worst < 1e-6, f"10 loops, worst relative deviation {worst:.2e}"


def criterion_singular_linear_contact():
    pair = PlatePair(
        ConstantProfile(0.0, 1.0),
        PolynomialWindow((0.0, -1.0), (-10.0, 0.0)),
        Tangency(0.0, 1, 5.0),
    )
    rec = singular_run(pair, 0.0, PhasePoint(-1.0, 10.0), StopRule(n_events=3000))
    speeds = rec.post_speeds[1::2]
    incs = np.diff(np.concatenate([[10.0], speeds]))
    worst = float(np.abs(incs - 2.0).max())
    n_before = int(np.sum(rec.times < -1e-6))
    ok = worst <= 1e-8 and n_before > 1000
    return ok, f"worst increment error {worst:.2e}, {n_before} collisions before t = -1e-6"


def criterion_singular_quadratic_contact():
    pair = PlatePair(
        ConstantProfile(0.0, 1.0),
        PolynomialWindow((0.0, 0.0, 1.0), (-10.0, 0.0)),
        Tangency(0.0, 2, 5.0),
    )
    rec = singular_run(pair, 0.0, PhasePoint(-0.5, 20.0), StopRule(n_events=200))
    slope = rec.growth_fit.slope
    speeds = rec.post_speeds[1::2]
    increasing = bool(np.all(np.diff(speeds) > 0.0))
    ok = abs(slope - 1.0) <= 0.1 and increasing
    return ok, f"fit slope {slope:.4f} vs local model, strictly increasing: {increasing}"


def criterion_creep_divergence():
    res = creep_iterate("square", -0.1, 10**6)
    n = np.arange(len(res.sequence))
    tail = n > 10**4
    prod = n[tail] * (-res.sequence[tail])
    ok = (
        float(prod.min()) >= 0.8
        and float(prod.max()) <= 1.2
        and float(res.partial_sums[-1]) > 10.0
    )
    return ok, (
        f"n(-s_n) in [{prod.min():.3f}, {prod.max():.3f}], "
        f"partial sums {res.partial_sums[-1]:.2f}"
    )


def criterion_smooth_boundedness():
    from .records import TrajectoryRecord

    plates = PlatePair(SinusoidProfile(0.01, 1.0), SinusoidProfile(0.01, 1.0, 1.0, 1.0))
    g = 2.0
    v_grid = np.linspace(8.0, 12.0, 32)
    worst_ratio = 0.0
    for i, v0 in enumerate(v_grid):
        t0 = (0.37 * i) % 1.0
        result = iterate_map(PhasePoint(t0, float(v0)), plates, g, 10**6)
        if result.status != "ok" or result.n_done != 10**6:
            return False, f"run {i} stopped early: {result.status} at {result.n_done}"
        rec = TrajectoryRecord(model="fermi_ulam", scenario_key="boundedness",
                               times=result.times, post_speeds=result.speeds)
        rep = envelope(rec, window=1024)
        worst_ratio = max(worst_ratio, rep.half_ratio)
        if rep.verdict != "bounded_evidence":
            return False, (
                f"run {i} classified {rep.verdict} "
                f"(half-ratio {rep.half_ratio:.4f}, slope {rep.slope:.2e})"
            )
    return True, f"32 runs of 1e6 iterations, worst half-ratio {worst_ratio:.4f}"


def criterion_collision_conservation():
    rng = np.random.default_rng(7)
    m = rng.uniform(0.1, 10.0, (10**4, 2))
    v = rng.uniform(-10.0, 10.0, (10**4, 2))
    worst_p = 0.0
    worst_e = 0.0
    for (m1, m2), (v1, v2) in zip(m, v):
        p1, p2 = ball_ball_collide(m1, v1, m2, v2)
        e_in = m1 * v1 * v1 + m2 * v2 * v2
        e_out = m1 * p1 * p1 + m2 * p2 * p2
        scale_p = abs(m1 * v1) + abs(m2 * v2) + 1e-30
        worst_p = max(worst_p, abs(m1 * p1 + m2 * p2 - m1 * v1 - m2 * v2) / scale_p)
        worst_e = max(worst_e, abs(e_out - e_in) / (e_in + 1e-30))
    exchange_exact = ball_ball_collide(1.5, -4.0, 1.5, 7.0) == (7.0, -4.0)
    ok = worst_p <= 1e-12 and worst_e <= 1e-12 and exchange_exact
    return ok, (
        f"momentum dev {worst_p:.2e}, energy dev {worst_e:.2e}, "
        f"equal-mass exchange exact: {exchange_exact}"
    )


def criterion_oracle_equivalence():
    from .oracle import OracleSettings, oracle_run
    from .config import run_scenario

    scenarios = _random_scenarios(100)
    worst_dt = 0.0
    for i, cfg in enumerate(scenarios):
        engine = run_scenario(cfg)
        if engine.n_events < 7:
            return False, f"scenario {i} produced only {engine.n_events} events"
        horizon = 0.5 * (engine.times[5] + engine.times[6])
        oracle_rec = oracle_run(cfg, horizon, OracleSettings(h=1e-5))
        kinds_e = [e.kind for e in engine.events[:6]]
        kinds_o = [e.kind for e in oracle_rec.events]
        if kinds_e != kinds_o:
            return False, f"scenario {i} kind sequences differ: {kinds_e} vs {kinds_o}"
        dt = float(np.abs(engine.times[:6] - oracle_rec.times[:6]).max())
        worst_dt = max(worst_dt, dt)
        if dt > 5.0 * cfg.tolerances.t_tol:
            return False, f"scenario {i} event times differ by {dt:.2e}"
    return True, f"100 scenarios, kinds identical, worst |dt| {worst_dt:.2e}"


def _random_scenarios(count):
    from .config import ScenarioConfig, run_scenario

    rng = np.random.default_rng(20240811)
    scenarios = []
    attempts = 0
    while len(scenarios) < count and attempts < 20 * count:
        attempts += 1
        model = ("one_ball", "fermi_ulam", "two_ball")[len(scenarios) % 3]
        g = float(rng.uniform(1.0, 2.5))
        if model == "one_ball":
            cfg = ScenarioConfig(
                model=model, g=g,
                plate_spec={
                    "kind": "sinusoid",
                    "amplitude": float(rng.uniform(0.005, 0.03)),
                    "period": 1.0,
                    "phase": float(rng.uniform(0.0, 2.0 * math.pi)),
                },
                initial={"t": float(rng.uniform(0.0, 1.0)),
                         "v": float(rng.uniform(2.5, 5.0))},
                stop=StopRule(n_events=7),
                echo={"model": model, "draw": attempts},
            )
        elif model == "fermi_ulam":
            cfg = ScenarioConfig(
                model=model, g=g,
                lower_spec={
                    "kind": "sinusoid",
                    "amplitude": float(rng.uniform(0.005, 0.02)),
                    "period": 1.0,
                    "phase": float(rng.uniform(0.0, 2.0 * math.pi)),
                },
                upper_spec={
                    "kind": "sinusoid",
                    "amplitude": float(rng.uniform(0.005, 0.02)),
                    "period": 1.0,
                    "phase": float(rng.uniform(0.0, 2.0 * math.pi)),
                    "offset": 1.0,
                },
                initial={"t": float(rng.uniform(0.0, 1.0)),
                         "v": float(rng.uniform(3.5, 6.0))},
                stop=StopRule(n_events=7),
                echo={"model": model, "draw": attempts},
            )
        else:
            z1 = float(rng.uniform(0.3, 0.8))
            cfg = ScenarioConfig(
                model=model, g=g,
                plate_spec={
                    "kind": "sinusoid",
                    "amplitude": float(rng.uniform(0.005, 0.02)),
                    "period": 1.0,
                    "phase": float(rng.uniform(0.0, 2.0 * math.pi)),
                },
                initial={
                    "t": 0.0,
                    "balls": [
                        BallState(float(rng.uniform(0.5, 2.0)), z1,
                                  float(rng.uniform(-1.0, 2.0)), "P1"),
                        BallState(float(rng.uniform(0.5, 2.0)),
                                  z1 + float(rng.uniform(0.4, 1.0)),
                                  float(rng.uniform(-2.0, 1.0)), "P2"),
                    ],
                },
                stop=StopRule(n_events=7),
                echo={"model": model, "draw": attempts},
            )
        try:
            probe = run_scenario(cfg)
        except Exception:
            continue
        if probe.n_events >= 7:
            scenarios.append(cfg)
    if len(scenarios) < count:
        raise RuntimeError("scenario generator failed to fill the quota")
    return scenarios


def criterion_orbit_plate_equivalence():
    plate = SinusoidProfile(0.5, 1.0)
    g = 2.0
    spec = ResonantSpec.locate(plate, g, "steady", 3)
    orbit = build_resonant(spec, plate, g, 4)
    pair = orbit_as_upper_plate(orbit, plate, g)

    t_start = spec.t0 + 0.2
    v0 = spec.launch_speed(plate, g)
    z2 = plate.eval(spec.t0) + v0 * 0.2 - 0.5 * g * 0.04
    balls = (
        BallState(0.0, plate.eval(t_start), 8.0, "P1"),
        BallState(1.0, z2, v0 - g * 0.2, "P2"),
    )
    rec = two_ball_simulate(balls, plate, g, StopRule(n_events=20), t0=t_start)
    p1_events = [(e.kind, e.time) for e in rec.events if "P1" in e.bodies][:20]

    t, v = t_start, 8.0
    map_events = []
    while len(map_events) < len(p1_events):
        p_out, (tm, _vm) = collision_map(PhasePoint(t, v), pair, g)
        map_events.append(("ball_ball", tm))
        map_events.append(("plate_hit", p_out.t))
        t, v = p_out.t, p_out.v
    kinds_ok = all(a[0] == b[0] for a, b in zip(p1_events, map_events))
    worst = max(abs(a[1] - b[1]) for a, b in zip(p1_events, map_events))
    if not (kinds_ok and worst <= 10.0 * 1e-11):
        return False, f"dual-engine mismatch: kinds {kinds_ok}, |dt| {worst:.2e}"

    t_star = pair.tangency.t_star
    for t0s in (t_star - 0.30, t_star - 0.18, t_star - 0.08):
        for v0s in (8.0, 12.0, 16.0):
            run = singular_run(pair, g, PhasePoint(t0s, v0s), StopRule(n_events=400))
            verdict = envelope(run, window=16).verdict
            if verdict != "growth_evidence":
                return False, f"sample ({t0s:.2f}, {v0s}) verdict {verdict}"
    return True, f"20 dual-engine events within {worst:.2e}; 9/9 growth_evidence"


_DETERMINISM_CONFIG = """\
[scenario]
model = one_ball
g = 2.0
seed = 1

[plate]
kind = sinusoid
amplitude = 0.5
period = 1.0

[initial]
t = 0.19844237578627144
v = 3.0

[stop]
n_events = 100
"""


def criterion_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = os.path.join(tmp, "scenario.cfg")
        with open(cfg_path, "w", encoding="utf-8") as fh:
            fh.write(_DETERMINISM_CONFIG)
        payloads = {}
        for threads in ("1", "8"):
            out = os.path.join(tmp, f"run{threads}")
            env = dict(os.environ, BOUNCE_LAB_THREADS=threads)
            proc = subprocess.run(
                [sys.executable, "-m", "bounce_lab", "simulate", cfg_path,
                 "--out", out],
                env=env, capture_output=True, text=True,
            )
            if proc.returncode != 0:
                return False, f"simulate exited {proc.returncode}: {proc.stderr}"
            with open(os.path.join(out, "events.csv"), "rb") as fh:
                events = fh.read()
            with open(os.path.join(out, "summary.json"), "rb") as fh:
                summary = fh.read()
            payloads[threads] = (events, summary)
    same = payloads["1"] == payloads["8"]
    return same, "byte-identical outputs at 1 and 8 threads" if same else \
        "outputs differ between thread counts"


@dataclass
class Criterion:
    number: int
    name: str
    fn: callable
    requires: tuple = ()


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    skipped: bool
    detail: str
    elapsed: float


CRITERIA = [
    Criterion(1, "resonant-acceleration", criterion_resonant_acceleration),
    Criterion(2, "steady-orbit", criterion_steady_orbit),
    Criterion(3, "loop-action-invariance", criterion_loop_invariant),
    Criterion(4, "singular-linear-contact", criterion_singular_linear_contact),
    Criterion(5, "singular-quadratic-contact", criterion_singular_quadratic_contact),
    Criterion(6, "creep-divergence", criterion_creep_divergence),
    Criterion(7, "smooth-boundedness", criterion_smooth_boundedness),
    Criterion(8, "collision-conservation", criterion_collision_conservation),
    Criterion(9, "oracle-equivalence", criterion_oracle_equivalence,
              ("bounce_lab.oracle",)),
    Criterion(10, "orbit-plate-equivalence", criterion_orbit_plate_equivalence),
    Criterion(11, "determinism", criterion_determinism),
]


def run_criterion(crit: Criterion, **overrides) -> CriterionResult:
    for module in crit.requires:
        try:
            importlib.import_module(module)
        except ImportError:
            return CriterionResult(
                crit.number, crit.name, passed=False, skipped=True,
                detail=f"required module {module} unavailable", elapsed=0.0,
            )
    start = time.perf_counter()
    try:
        passed, detail = crit.fn(**overrides)
    except Exception as exc:
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - start
    return CriterionResult(crit.number, crit.name, passed, False, detail, elapsed)


def run_criteria(only=None, **overrides):
    results = []
    for crit in CRITERIA:
        if only is not None and crit.number not in only:
            continue
        results.append(run_criterion(crit, **overrides))
    return results
