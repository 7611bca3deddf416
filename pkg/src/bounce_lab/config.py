"""Scenario configuration: parsing, validation, and engine dispatch.

Config files are line-oriented ``key = value`` under ``[section]`` headers
(UTF-8).  Floats are parsed with exact decimal semantics and echoed back
into summaries for audit.
"""

from __future__ import annotations

import configparser
import copy
from dataclasses import dataclass, field, replace
from typing import Optional

from .bouncing import BallState, two_ball_simulate
from .collision import RootSolveSettings
from .errors import (
    BelowValidityThreshold,
    ConfigError,
    NoImpact,
    ProfileError,
)
from .fermi_ulam import PhasePoint, collision_map, singular_run
from .forcing import ForcingProfile, PlatePair, Tangency, make_profile
from .oracle import OracleSettings
from .records import (
    CollisionEvent,
    StopRule,
    TrajectoryRecord,
    scenario_fingerprint,
)

_MODELS = (
    "fermi_ulam",
    "fermi_ulam_singular",
    "one_ball",
    "two_ball",
    "restricted_case1",
    "restricted_case2",
)
_FERMI_MODELS = ("fermi_ulam", "fermi_ulam_singular")
_TWO_BALL_MODELS = ("two_ball", "restricted_case1", "restricted_case2")

_PROFILE_KEYS = {
    "constant": {"kind", "level", "period"},
    "sinusoid": {"kind", "amplitude", "period", "phase", "offset"},
    "harmonics": {"kind", "period", "offset", "terms"},
    "polynomial": {"kind", "coefficients", "window"},
}


@dataclass
class ScenarioConfig:
    """Complete experiment description; the CLI's unit of work."""

    model: str
    g: float
    seed: int = 0
    l: Optional[float] = None
    plate_spec: Optional[dict] = None
    lower_spec: Optional[dict] = None
    upper_spec: Optional[dict] = None
    tangency_spec: Optional[dict] = None
    initial: dict = field(default_factory=dict)
    stop: StopRule = None
    tolerances: RootSolveSettings = field(default_factory=RootSolveSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    echo: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        return scenario_fingerprint(self.echo)

    def build_plate(self) -> ForcingProfile:
        return make_profile(self.plate_spec)

    def build_plates(self) -> PlatePair:
        tang = None
        if self.tangency_spec is not None:
            tang = Tangency(
                self.tangency_spec["time"],
                int(self.tangency_spec["order"]),
                self.tangency_spec["window"],
            )
        pair = PlatePair(
            make_profile(self.lower_spec), make_profile(self.upper_spec), tang
        )
        pair.verify()
        return pair

    def with_initial(self, t0: Optional[float] = None, v0: Optional[float] = None
                     ) -> "ScenarioConfig":
        initial = copy.deepcopy(self.initial)
        echo = copy.deepcopy(self.echo)
        if t0 is not None:
            initial["t"] = t0
            echo.setdefault("initial", {})["t"] = t0
        if v0 is not None:
            initial["v"] = v0
            echo.setdefault("initial", {})["v"] = v0
        return replace(self, initial=initial, echo=echo)

    def validate(self) -> None:
        """Semantic checks beyond parsing; raises ConfigError."""
        if self.model not in _MODELS:
            raise ConfigError(f"unknown model {self.model!r}", field="scenario.model")
        if self.model in _FERMI_MODELS:
            if self.g < 0.0:
                raise ConfigError("fermi models need g >= 0", field="scenario.g")
            if self.lower_spec is None or self.upper_spec is None:
                raise ConfigError(
                    "fermi models need [lower_plate] and [upper_plate]",
                    field="lower_plate",
                )
            if self.model == "fermi_ulam_singular" and self.tangency_spec is None:
                raise ConfigError(
                    "fermi_ulam_singular needs a [tangency] section", field="tangency"
                )
            for key in ("t", "v"):
                if key not in self.initial:
                    raise ConfigError(f"[initial] missing {key}", field=f"initial.{key}")
            try:
                self.build_plates()
            except ProfileError as exc:
                raise ConfigError(str(exc), field="plates") from exc
        else:
            if self.g <= 0.0:
                raise ConfigError(
                    "bouncing models need g > 0", field="scenario.g"
                )
            if self.plate_spec is None:
                raise ConfigError("missing [plate] section", field="plate")
            try:
                self.build_plate()
            except ProfileError as exc:
                raise ConfigError(str(exc), field="plate") from exc
            if self.model == "one_ball":
                for key in ("t", "v"):
                    if key not in self.initial:
                        raise ConfigError(
                            f"[initial] missing {key}", field=f"initial.{key}"
                        )
            else:
                if "balls" not in self.initial or len(self.initial["balls"]) != 2:
                    raise ConfigError(
                        "two-ball models need [ball1] and [ball2]", field="ball1"
                    )
                lo, hi = sorted(self.initial["balls"], key=lambda b: b.z)
                if self.model == "restricted_case1" and not (
                    hi.mass == 0.0 and lo.mass > 0.0
                ):
                    raise ConfigError(
                        "restricted_case1 needs the upper ball massless",
                        field="ball2.mass",
                    )
                if self.model == "restricted_case2" and not (
                    lo.mass == 0.0 and hi.mass > 0.0
                ):
                    raise ConfigError(
                        "restricted_case2 needs the lower ball massless",
                        field="ball1.mass",
                    )
        if self.stop is None:
            raise ConfigError("missing [stop] section", field="stop")


def _parse_profile(section: configparser.SectionProxy, name: str) -> dict:
    kind = section.get("kind")
    if kind not in _PROFILE_KEYS:
        raise ConfigError(f"unknown profile kind {kind!r}", field=f"{name}.kind")
    allowed = _PROFILE_KEYS[kind]
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unexpected key {key!r}", field=f"{name}.{key}")
    try:
        if kind == "constant":
            return {
                "kind": kind,
                "level": section.getfloat("level", 0.0),
                "period": section.getfloat("period", 1.0),
            }
        if kind == "sinusoid":
            return {
                "kind": kind,
                "amplitude": section.getfloat("amplitude"),
                "period": section.getfloat("period"),
                "phase": section.getfloat("phase", 0.0),
                "offset": section.getfloat("offset", 0.0),
            }
        if kind == "harmonics":
            terms = []
            for chunk in section.get("terms", "").split(";"):
                chunk = chunk.strip()
                if not chunk:
                    continue
                parts = [float(x) for x in chunk.split(",")]
                if len(parts) != 3:
                    raise ValueError("each harmonic needs amplitude,omega,phase")
                terms.append(parts)
            return {
                "kind": kind,
                "terms": terms,
                "period": section.getfloat("period"),
                "offset": section.getfloat("offset", 0.0),
            }
        coeffs = [float(x) for x in section.get("coefficients", "").split(",")]
        window = [float(x) for x in section.get("window", "").split(",")]
        if len(window) != 2:
            raise ValueError("window needs 'lo, hi'")
        return {"kind": kind, "coefficients": coeffs, "window": window}
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field=name) from exc


_KNOWN_SECTIONS = {
    "scenario", "plate", "lower_plate", "upper_plate", "tangency",
    "initial", "ball1", "ball2", "stop", "tolerances", "oracle",
}


def parse_config(path: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="file") from exc
    except configparser.Error as exc:
        raise ConfigError(f"parse failure: {exc}", field="file") from exc

    for section in parser.sections():
        if section not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown section [{section}]", field=section)
    if "scenario" not in parser:
        raise ConfigError("missing [scenario] section", field="scenario")

    scen = parser["scenario"]
    for key in scen:
        if key not in ("model", "g", "seed", "l"):
            raise ConfigError(f"unexpected key {key!r}", field=f"scenario.{key}")
    model = scen.get("model")
    if model is None:
        raise ConfigError("missing model", field="scenario.model")
    try:
        g = scen.getfloat("g")
    except (TypeError, ValueError) as exc:
        raise ConfigError("g must be a number", field="scenario.g") from exc
    if g is None:
        raise ConfigError("missing g", field="scenario.g")

    cfg = ScenarioConfig(
        model=model,
        g=g,
        seed=scen.getint("seed", 0),
        l=scen.getfloat("l", fallback=None),
    )

    if "plate" in parser:
        cfg.plate_spec = _parse_profile(parser["plate"], "plate")
    if "lower_plate" in parser:
        cfg.lower_spec = _parse_profile(parser["lower_plate"], "lower_plate")
    if "upper_plate" in parser:
        cfg.upper_spec = _parse_profile(parser["upper_plate"], "upper_plate")
    if "tangency" in parser:
        sec = parser["tangency"]
        for key in sec:
            if key not in ("time", "order", "window"):
                raise ConfigError(f"unexpected key {key!r}", field=f"tangency.{key}")
        try:
            cfg.tangency_spec = {
                "time": sec.getfloat("time"),
                "order": sec.getint("order"),
                "window": sec.getfloat("window"),
            }
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field="tangency") from exc

    if "initial" in parser:
        sec = parser["initial"]
        for key in sec:
            if key not in ("t", "v"):
                raise ConfigError(f"unexpected key {key!r}", field=f"initial.{key}")
        if "t" in sec:
            cfg.initial["t"] = sec.getfloat("t")
        if "v" in sec:
            cfg.initial["v"] = sec.getfloat("v")

    balls = []
    for idx, label in ((1, "P1"), (2, "P2")):
        name = f"ball{idx}"
        if name in parser:
            sec = parser[name]
            for key in sec:
                if key not in ("mass", "z", "v"):
                    raise ConfigError(f"unexpected key {key!r}", field=f"{name}.{key}")
            try:
                balls.append(
                    BallState(
                        sec.getfloat("mass"), sec.getfloat("z"), sec.getfloat("v"), label
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), field=name) from exc
    if balls:
        cfg.initial["balls"] = balls
        cfg.initial.setdefault("t", 0.0)

    if "stop" in parser:
        sec = parser["stop"]
        for key in sec:
            if key not in ("n_events", "horizon_time", "v_threshold"):
                raise ConfigError(f"unexpected key {key!r}", field=f"stop.{key}")
        try:
            cfg.stop = StopRule(
                n_events=sec.getint("n_events", fallback=None),
                horizon_time=sec.getfloat("horizon_time", fallback=None),
                v_threshold=sec.getfloat("v_threshold", fallback=None),
            )
        except ValueError as exc:
            raise ConfigError(str(exc), field="stop") from exc

    if "tolerances" in parser:
        sec = parser["tolerances"]
        for key in sec:
            if key not in ("t_tol", "max_bracket_steps", "grazing_slope_floor"):
                raise ConfigError(f"unexpected key {key!r}", field=f"tolerances.{key}")
        try:
            cfg.tolerances = RootSolveSettings(
                t_tol=sec.getfloat("t_tol", 1e-11),
                max_bracket_steps=sec.getint("max_bracket_steps", 10**6),
                grazing_slope_floor=sec.getfloat("grazing_slope_floor", 1e-8),
            )
        except ValueError as exc:
            raise ConfigError(str(exc), field="tolerances") from exc

    if "oracle" in parser:
        sec = parser["oracle"]
        for key in sec:
            if key not in ("h", "refine_iters", "max_events", "chunk"):
                raise ConfigError(f"unexpected key {key!r}", field=f"oracle.{key}")
        cfg.oracle = OracleSettings(
            h=sec.getfloat("h", fallback=None),
            refine_iters=sec.getint("refine_iters", 60),
            max_events=sec.getint("max_events", 10**7),
            chunk=sec.getint("chunk", 65536),
        )

    cfg.echo = {
        sec: dict(parser[sec]) for sec in parser.sections()
    }
    return cfg


# ---------------------------------------------------------------------------
# engine dispatch


def run_scenario(cfg: ScenarioConfig) -> TrajectoryRecord:
    """Run the configured engine; TripleCollision propagates with its record."""
    if cfg.model == "one_ball":
        record = _run_one_ball(cfg)
    elif cfg.model == "fermi_ulam":
        record = _run_fermi(cfg)
    elif cfg.model == "fermi_ulam_singular":
        record = singular_run(
            cfg.build_plates(),
            cfg.g,
            PhasePoint(cfg.initial["t"], cfg.initial["v"]),
            cfg.stop,
            cfg.tolerances,
        )
    elif cfg.model in _TWO_BALL_MODELS:
        record = two_ball_simulate(
            tuple(cfg.initial["balls"]),
            cfg.build_plate(),
            cfg.g,
            cfg.stop,
            cfg.tolerances,
            t0=cfg.initial.get("t", 0.0),
        )
    else:
        raise ConfigError(f"unknown model {cfg.model!r}", field="scenario.model")
    record.scenario_key = cfg.fingerprint()
    return record


def _run_one_ball(cfg: ScenarioConfig) -> TrajectoryRecord:
    from .bouncing import one_ball_map

    plate = cfg.build_plate()
    settings = cfg.tolerances
    record = TrajectoryRecord(
        model="one_ball", scenario_key=cfg.fingerprint(),
        context={"plate": plate, "g": cfg.g, "t0": cfg.initial["t"]},
    )
    t, v = cfg.initial["t"], cfg.initial["v"]
    termination = "no_further_events"
    while True:
        reason = cfg.stop.done(len(record.events), t, v)
        if reason is not None:
            termination = reason
            break
        try:
            p = one_ball_map(PhasePoint(t, v), plate, cfg.g, settings)
        except NoImpact:
            termination = "escape"
            break
        record.events.append(
            CollisionEvent(
                kind="plate_hit",
                time=p.t,
                bodies=("ball",),
                pre={"ball": v - cfg.g * (p.t - t)},
                post={"ball": p.v},
                z=plate.eval(p.t),
                plate_velocity=plate.eval(p.t, 1),
            )
        )
        t, v = p.t, p.v
    record.finalize()
    record.termination = termination
    return record


def _run_fermi(cfg: ScenarioConfig) -> TrajectoryRecord:
    plates = cfg.build_plates()
    settings = cfg.tolerances
    record = TrajectoryRecord(
        model="fermi_ulam", scenario_key=cfg.fingerprint(),
        context={"plates": plates, "g": cfg.g, "t0": cfg.initial["t"]},
    )
    t, v = cfg.initial["t"], cfg.initial["v"]
    termination = "no_further_events"
    while True:
        reason = cfg.stop.done(len(record.events), t, v)
        if reason is not None:
            termination = reason
            break
        try:
            p_out, (tm, vm) = collision_map(PhasePoint(t, v), plates, cfg.g, settings)
        except BelowValidityThreshold:
            termination = "below_validity"
            break
        record.events.append(
            CollisionEvent(
                kind="plate_hit",
                time=tm,
                bodies=("ball",),
                pre={"ball": v - cfg.g * (tm - t)},
                post={"ball": vm},
                z=plates.upper.eval(tm),
                plate_velocity=plates.upper.eval(tm, 1),
            )
        )
        record.events.append(
            CollisionEvent(
                kind="plate_hit",
                time=p_out.t,
                bodies=("ball",),
                pre={"ball": vm - cfg.g * (p_out.t - tm)},
                post={"ball": p_out.v},
                z=plates.lower.eval(p_out.t),
                plate_velocity=plates.lower.eval(p_out.t, 1),
            )
        )
        t, v = p_out.t, p_out.v
    record.finalize()
    record.termination = termination
    return record
