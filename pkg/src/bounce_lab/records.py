"""Event and trajectory containers shared by every engine."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class CollisionEvent:
    """One resolved impact.

    kind is one of ``plate_hit``, ``ball_ball``, ``triple``.  Velocity maps
    are keyed by body label; triple events carry no post state.  z is the
    contact height, plate_velocity is set for plate hits only.
    """

    kind: str
    time: float
    bodies: tuple
    pre: dict
    post: dict
    z: float
    plate_velocity: Optional[float] = None


@dataclass
class StopRule:
    """Stop a run at whichever bound is reached first (None = unbounded)."""

    n_events: Optional[int] = None
    horizon_time: Optional[float] = None
    v_threshold: Optional[float] = None

    def __post_init__(self):
        if self.n_events is None and self.horizon_time is None and self.v_threshold is None:
            raise ValueError("stop rule needs at least one bound")

    def done(self, n_events: int, time: float, speed: float) -> Optional[str]:
        if self.n_events is not None and n_events >= self.n_events:
            return "n_events"
        if self.horizon_time is not None and time >= self.horizon_time:
            return "horizon_time"
        if self.v_threshold is not None and speed >= self.v_threshold:
            return "v_threshold"
        return None


@dataclass
class GrowthFit:
    """Least-squares gain of observed speed increments against the local
    contact-order model, over the early, well-resolved events."""

    slope: float
    model_coefficient: float
    n_points: int
    positive_increments: bool


@dataclass
class TrajectoryRecord:
    """Ordered event sequence plus the derived series used by diagnostics."""

    model: str
    scenario_key: str
    events: list = field(default_factory=list)
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    post_speeds: np.ndarray = field(default_factory=lambda: np.empty(0))
    termination: str = "unterminated"
    growth_fit: Optional[GrowthFit] = None
    deviations: Optional[np.ndarray] = None
    context: dict = field(default_factory=dict)

    @property
    def n_events(self) -> int:
        return len(self.times)

    def flight_times(self) -> np.ndarray:
        return np.diff(self.times)

    def finalize(self) -> "TrajectoryRecord":
        """Fill the derived series from the event list if not already set."""
        if len(self.times) == 0 and self.events:
            self.times = np.asarray([e.time for e in self.events])
            speeds = []
            for e in self.events:
                if e.post:
                    speeds.append(max(abs(v) for v in e.post.values()))
                else:
                    speeds.append(float("nan"))
            self.post_speeds = np.asarray(speeds)
        return self


def scenario_fingerprint(payload: dict) -> str:
    """Stable short key identifying a scenario; used to refuse mixing records."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.md5(blob).hexdigest()[:12]
