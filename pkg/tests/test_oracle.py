import math

import numpy as np
import pytest

from bounce_lab import BallState, OracleSettings, StopRule, oracle_run
from bounce_lab.acceptance import _random_scenarios
from bounce_lab.config import ScenarioConfig, run_scenario
from bounce_lab.errors import EventStorm


def _static_fermi_config():
    return ScenarioConfig(
        model="fermi_ulam", g=2.0,
        lower_spec={"kind": "constant", "level": 0.0, "period": 1.0},
        upper_spec={"kind": "constant", "level": 1.0, "period": 1.0},
        initial={"t": 0.0, "v": 3.0},
        stop=StopRule(n_events=6),
        echo={"case": "static_fermi"},
    )


def test_static_fermi_first_event_closed_form():
    rec = oracle_run(_static_fermi_config(), horizon=1.0)
    expected = (3.0 - math.sqrt(5.0)) / 2.0
    assert rec.events[0].time == pytest.approx(expected, abs=1e-9)
    assert [e.kind for e in rec.events] == ["plate_hit", "plate_hit"]


def test_one_ball_symmetric_hop():
    cfg = ScenarioConfig(
        model="one_ball", g=2.0,
        plate_spec={"kind": "constant", "level": 0.0, "period": 1.0},
        initial={"t": 0.0, "v": 1.0},
        stop=StopRule(n_events=2),
        echo={"case": "hop"},
    )
    rec = oracle_run(cfg, horizon=2.5)
    assert rec.events[0].time == pytest.approx(1.0, abs=1e-9)
    assert rec.events[1].time == pytest.approx(2.0, abs=1e-9)


def test_matches_event_engine_on_random_scenarios():
    for cfg in _random_scenarios(9):
        engine = run_scenario(cfg)
        horizon = 0.5 * (engine.times[5] + engine.times[6])
        oracle = oracle_run(cfg, horizon, OracleSettings(h=1e-5))
        assert [e.kind for e in oracle.events] == [e.kind for e in engine.events[:6]]
        assert np.abs(oracle.times[:6] - engine.times[:6]).max() <= 5.0 * cfg.tolerances.t_tol


def test_step_halving_stability():
    cfg = _static_fermi_config()
    coarse = oracle_run(cfg, horizon=1.0, settings=OracleSettings(h=2e-5))
    fine = oracle_run(cfg, horizon=1.0, settings=OracleSettings(h=1e-5))
    assert coarse.n_events == fine.n_events
    assert np.abs(coarse.times - fine.times).max() < cfg.tolerances.t_tol


def test_step_below_t_tol_rejected():
    cfg = _static_fermi_config()
    with pytest.raises(ValueError):
        oracle_run(cfg, horizon=1.0, settings=OracleSettings(h=1e-12))


def test_event_storm_guard():
    cfg = _static_fermi_config()
    with pytest.raises(EventStorm):
        oracle_run(cfg, horizon=50.0, settings=OracleSettings(h=1e-4, max_events=5))


def test_two_ball_oracle_handles_pair_gap():
    cfg = ScenarioConfig(
        model="two_ball", g=2.0,
        plate_spec={"kind": "constant", "level": 0.0, "period": 1.0},
        initial={
            "t": 0.0,
            "balls": [
                BallState(1.0, 1.0, 3.0, "P1"),
                BallState(1.0, 2.0, 1.0, "P2"),
            ],
        },
        stop=StopRule(n_events=1),
        echo={"case": "pair"},
    )
    rec = oracle_run(cfg, horizon=0.6, settings=OracleSettings(h=1e-5))
    assert rec.events[0].kind == "ball_ball"
    assert rec.events[0].time == pytest.approx(0.5, abs=1e-9)
