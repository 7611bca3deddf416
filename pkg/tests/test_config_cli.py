import csv
import json
import math
import os
import subprocess
import sys

import pytest

from bounce_lab.cli import main
from bounce_lab.config import parse_config
from bounce_lab.errors import ConfigError

GAMMA2_T0 = math.acos(1.0 / math.pi) / (2.0 * math.pi)

ONE_BALL_CFG = f"""\
[scenario]
model = one_ball
g = 2.0
seed = 1

[plate]
kind = sinusoid
amplitude = 0.5
period = 1.0

[initial]
t = {GAMMA2_T0!r}
v = 3.0

[stop]
n_events = 6
"""

SINGULAR_CFG = """\
[scenario]
model = fermi_ulam_singular
g = 0.0

[lower_plate]
kind = constant
level = 0.0
period = 1.0

[upper_plate]
kind = polynomial
coefficients = 0.0, -1.0
window = -10.0, 0.0

[tangency]
time = 0.0
order = 1
window = 5.0

[initial]
t = -1.0
v = 10.0

[stop]
v_threshold = 50.0
"""

TRIPLE_CFG = f"""\
[scenario]
model = two_ball
g = 2.0

[plate]
kind = constant
level = 0.0
period = 1.0

[ball1]
mass = 1.0
z = 1.5
v = {-1.0 / math.sqrt(0.5)!r}

[ball2]
mass = 1.0
z = 0.5
v = 0.0

[stop]
n_events = 10
"""


def _write(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(body, encoding="utf-8")
    return str(path)


class TestParsing:
    def test_round_trip_fields(self, tmp_path):
        cfg = parse_config(_write(tmp_path, "a.cfg", ONE_BALL_CFG))
        cfg.validate()
        assert cfg.model == "one_ball" and cfg.g == 2.0 and cfg.seed == 1
        assert cfg.initial["v"] == 3.0
        assert cfg.stop.n_events == 6

    def test_missing_g_is_config_error(self, tmp_path):
        broken = ONE_BALL_CFG.replace("g = 2.0\n", "")
        with pytest.raises(ConfigError) as info:
            parse_config(_write(tmp_path, "b.cfg", broken))
        assert info.value.field == "scenario.g"

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(_write(tmp_path, "c.cfg", ONE_BALL_CFG + "\nwhatever = 1\n"))

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(_write(tmp_path, "d.cfg", ONE_BALL_CFG + "\n[mystery]\nx = 1\n"))

    def test_negative_g_rejected_for_bouncing_model(self, tmp_path):
        bad = ONE_BALL_CFG.replace("g = 2.0", "g = 0.0")
        cfg = parse_config(_write(tmp_path, "e.cfg", bad))
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_initial_override(self, tmp_path):
        cfg = parse_config(_write(tmp_path, "f.cfg", ONE_BALL_CFG))
        cfg2 = cfg.with_initial(v0=4.5)
        assert cfg2.initial["v"] == 4.5
        assert cfg.initial["v"] == 3.0
        assert cfg2.fingerprint() != cfg.fingerprint()


class TestSimulateCommand:
    def test_resonant_scenario_files(self, tmp_path):
        cfg = _write(tmp_path, "run.cfg", ONE_BALL_CFG)
        out = str(tmp_path / "out")
        assert main(["simulate", cfg, "--out", out]) == 0
        with open(os.path.join(out, "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["schema_version"] == 1
        assert summary["n_events"] == 6
        # chained resonant hops track v = 3 + 2 n at short horizons
        assert summary["final_velocities"]["ball"] == pytest.approx(15.0, abs=1e-3)
        assert summary["config"]["scenario"]["g"] == "2.0"
        with open(os.path.join(out, "events.csv")) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["event_index", "kind", "time", "body", "v_pre",
                           "v_post", "plate_velocity", "z"]
        assert len(rows) == 7

    def test_singular_threshold_stop(self, tmp_path):
        cfg = _write(tmp_path, "sing.cfg", SINGULAR_CFG)
        out = str(tmp_path / "out")
        assert main(["simulate", cfg, "--out", out]) == 0
        with open(os.path.join(out, "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["termination"] == "v_threshold"
        assert summary["final_time"] < 0.0  # threshold crossed before the touch
        assert summary["growth_fit"]["slope"] == pytest.approx(1.0, abs=1e-6)

    def test_malformed_config_exits_2(self, tmp_path):
        cfg = _write(tmp_path, "bad.cfg", ONE_BALL_CFG.replace("g = 2.0\n", ""))
        assert main(["simulate", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_triple_collision_exits_3(self, tmp_path):
        cfg = _write(tmp_path, "triple.cfg", TRIPLE_CFG)
        out = str(tmp_path / "out")
        assert main(["simulate", cfg, "--out", out]) == 3
        with open(os.path.join(out, "events.csv")) as fh:
            rows = list(csv.reader(fh))
        assert any(r[1] == "triple" for r in rows[1:])


class TestSweepCommand:
    def test_empty_grid(self, tmp_path):
        cfg = _write(tmp_path, "run.cfg", ONE_BALL_CFG)
        out = str(tmp_path / "out")
        assert main(["sweep", cfg, "--grid", "v0=3:4:0", "--out", out]) == 0
        with open(os.path.join(out, "sweep.csv")) as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1  # header only

    def test_singular_sweep_all_growth(self, tmp_path):
        body = SINGULAR_CFG.replace("v_threshold = 50.0", "n_events = 300")
        cfg = _write(tmp_path, "sing.cfg", body)
        out = str(tmp_path / "out")
        code = main(["sweep", cfg, "--grid", "t0=-0.9:-0.3:3,v0=10:20:2", "--out", out])
        assert code == 0
        with open(os.path.join(out, "sweep.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert all(r["verdict"] == "growth_evidence" for r in rows)
        assert [int(r["cell_index"]) for r in rows] == list(range(6))

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        body = SINGULAR_CFG.replace("v_threshold = 50.0", "n_events = 120")
        cfg = _write(tmp_path, "sing.cfg", body)
        payloads = {}
        for threads in ("1", "3"):
            out = str(tmp_path / f"out{threads}")
            env = dict(os.environ, BOUNCE_LAB_THREADS=threads)
            proc = subprocess.run(
                [sys.executable, "-m", "bounce_lab", "sweep", cfg,
                 "--grid", "v0=10:14:3", "--out", out],
                env=env, capture_output=True,
            )
            assert proc.returncode == 0
            payloads[threads] = (tmp_path / f"out{threads}" / "sweep.csv").read_bytes()
        assert payloads["1"] == payloads["3"]


class TestPortraitCommand:
    def test_rows_and_header(self, tmp_path):
        cfg = _write(tmp_path, "run.cfg", ONE_BALL_CFG)
        out = str(tmp_path / "out")
        assert main(["portrait", cfg, "--coords", "tv", "--out", out]) == 0
        with open(os.path.join(out, "portrait.csv")) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["trajectory_id", "event_index", "t_mod", "value"]
        assert len(rows) == 7
        t_mods = [float(row[2]) for row in rows[1:]]
        assert max(t_mods) - min(t_mods) < 1e-5  # resonant phase lock

    def test_ty_without_scale_exits_2(self, tmp_path):
        cfg = _write(tmp_path, "run.cfg", ONE_BALL_CFG)
        assert main(["portrait", cfg, "--coords", "ty",
                     "--out", str(tmp_path / "out")]) == 2


FERMI_SMOOTH_CFG = """\
[scenario]
model = fermi_ulam
g = 2.0

[lower_plate]
kind = sinusoid
amplitude = 0.01
period = 1.0

[upper_plate]
kind = sinusoid
amplitude = 0.01
period = 1.0
phase = 1.0
offset = 1.0

[initial]
t = 0.1
v = 9.0

[stop]
n_events = 2000
"""


def test_smooth_regime_sweep_all_bounded(tmp_path):
    cfg = _write(tmp_path, "smooth.cfg", FERMI_SMOOTH_CFG)
    out = str(tmp_path / "out")
    assert main(["sweep", cfg, "--grid", "v0=8:11:2,t0=0.1:0.6:2", "--out", out]) == 0
    with open(os.path.join(out, "sweep.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert all(r["verdict"] == "bounded_evidence" for r in rows)


class TestValidateCommand:
    def test_subset_passes(self, capsys):
        assert main(["validate", "--only", "1,8"]) == 0
        out = capsys.readouterr().out
        assert "PASS  01" in out and "PASS  08" in out

    def test_missing_module_is_nonzero(self, capsys, monkeypatch):
        monkeypatch.setitem(sys.modules, "bounce_lab.oracle", None)
        assert main(["validate", "--only", "9"]) == 1
        assert "SKIP  09" in capsys.readouterr().out
