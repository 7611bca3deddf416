"""Command-line harness: simulate, sweep, portrait, validate.

Flat-file outputs only.  All numeric CSV fields use the shortest
round-trip decimal representation, so reruns diff byte for byte.
BOUNCE_LAB_THREADS overrides sweep parallelism; it never changes output
bytes.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ScenarioConfig, parse_config, run_scenario
from .diagnostics import envelope, phase_portrait
from .errors import ConfigError, TooShort, TripleCollision
from .records import TrajectoryRecord

SCHEMA_VERSION = 1


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_events_csv(path: str, record: TrajectoryRecord) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["event_index", "kind", "time", "body", "v_pre", "v_post",
             "plate_velocity", "z"]
        )
        for i, e in enumerate(record.events):
            for body in e.bodies:
                writer.writerow([
                    i,
                    e.kind,
                    _fmt(e.time),
                    body,
                    _fmt(e.pre.get(body)),
                    _fmt(e.post.get(body)),
                    _fmt(e.plate_velocity),
                    _fmt(e.z),
                ])


def _summary_payload(cfg: ScenarioConfig, record: TrajectoryRecord) -> dict:
    final_speeds = {}
    for e in record.events:
        for body, v in e.post.items():
            final_speeds[body] = v
    env = None
    try:
        rep = envelope(record, window=16, seed=cfg.seed)
        env = {
            "verdict": rep.verdict,
            "slope": rep.slope,
            "half_ratio": rep.half_ratio,
            "global_sup": rep.global_sup,
        }
    except (TooShort, ValueError):
        pass
    growth = None
    if record.growth_fit is not None:
        growth = {
            "slope": record.growth_fit.slope,
            "model_coefficient": record.growth_fit.model_coefficient,
            "n_points": record.growth_fit.n_points,
        }
    singular = (
        any(e.kind == "triple" for e in record.events)
        or "zero_mass_singularity_at" in record.context
    )
    return {
        "schema_version": SCHEMA_VERSION,
        "model": record.model,
        "scenario_key": record.scenario_key,
        "config": cfg.echo,
        "n_events": record.n_events,
        "final_time": float(record.times[-1]) if record.n_events else None,
        "final_velocities": final_speeds,
        "termination": record.termination,
        "envelope": env,
        "growth_fit": growth,
        "singular_outcome": singular,
    }


def write_summary_json(path: str, cfg: ScenarioConfig, record: TrajectoryRecord) -> int:
    payload = _summary_payload(cfg, record)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return 3 if payload["singular_outcome"] else 0


def cmd_simulate(args) -> int:
    try:
        cfg = parse_config(args.config)
        cfg.validate()
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return 2
    try:
        record = run_scenario(cfg)
    except TripleCollision as exc:
        record = exc.record
    os.makedirs(args.out, exist_ok=True)
    write_events_csv(os.path.join(args.out, "events.csv"), record)
    code = write_summary_json(os.path.join(args.out, "summary.json"), cfg, record)
    print(f"{record.model}: {record.n_events} events, termination={record.termination}")
    return code


def _parse_grid(spec: str):
    """Grid spec 'name=start:stop:count[,name=...]'; names t0 and v0."""
    axes = []
    if spec.strip():
        for chunk in spec.split(","):
            name, _, rng = chunk.partition("=")
            name = name.strip()
            if name not in ("t0", "v0"):
                raise ConfigError(f"unknown grid axis {name!r}", field="grid")
            parts = rng.split(":")
            if len(parts) != 3:
                raise ConfigError("grid axis needs start:stop:count", field="grid")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            values = np.linspace(start, stop, count) if count > 0 else np.empty(0)
            axes.append((name, values))
    return axes


def _thread_count() -> int:
    env = os.environ.get("BOUNCE_LAB_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _sweep_cell(payload):
    config_path, overrides = payload
    cfg = parse_config(config_path)
    cfg.validate()
    cfg = cfg.with_initial(
        t0=overrides.get("t0"), v0=overrides.get("v0")
    )
    try:
        record = run_scenario(cfg)
    except TripleCollision as exc:
        record = exc.record
        return _cell_row(record, "triple_collision")
    except Exception as exc:  # per-cell failures never abort a sweep
        return {"verdict": "error", "n_events": 0, "max_speed": "",
                "status": type(exc).__name__}
    return _cell_row(record, "ok")


def _cell_row(record, status):
    try:
        verdict = envelope(record, window=16).verdict
    except (TooShort, ValueError):
        verdict = "inconclusive"
    finite = record.post_speeds[np.isfinite(record.post_speeds)]
    max_speed = _fmt(float(finite.max())) if len(finite) else ""
    return {
        "verdict": verdict,
        "n_events": record.n_events,
        "max_speed": max_speed,
        "status": status,
    }


def cmd_sweep(args) -> int:
    try:
        cfg = parse_config(args.config)
        cfg.validate()
        axes = _parse_grid(args.grid)
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return 2
    names = [name for name, _ in axes]
    cells = list(itertools.product(*(vals for _, vals in axes))) if axes else []
    payloads = [
        (args.config, dict(zip(names, cell))) for cell in cells
    ]
    workers = _thread_count()
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_index", *names, "verdict", "n_events",
                         "max_speed", "status"])
        for i, (cell, row) in enumerate(zip(cells, results)):
            writer.writerow([
                i, *(_fmt(x) for x in cell), row["verdict"], row["n_events"],
                row["max_speed"], row["status"],
            ])
    print(f"sweep: {len(cells)} cells -> {path}")
    return 0


def cmd_portrait(args) -> int:
    try:
        cfg = parse_config(args.config)
        cfg.validate()
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return 2
    try:
        record = run_scenario(cfg)
    except TripleCollision as exc:
        record = exc.record
    try:
        rows = phase_portrait([record], coords=args.coords, l=cfg.l)
    except ValueError as exc:
        print(f"config error [scenario.l]: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "portrait.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trajectory_id", "event_index", "t_mod", "value"])
        for traj, idx, t_mod, value in rows:
            writer.writerow([traj, idx, _fmt(t_mod), _fmt(value)])
    print(f"portrait: {len(rows)} rows -> {path}")
    return 0


def cmd_validate(args) -> int:
    from .acceptance import run_criteria

    only = None
    if args.only:
        only = {int(x) for x in args.only.split(",")}
    results = run_criteria(only=only)
    failed = False
    for res in results:
        mark = "PASS" if res.passed else ("SKIP" if res.skipped else "FAIL")
        if not res.passed:
            failed = True
        print(f"{mark}  {res.number:02d} {res.name}  ({res.elapsed:.2f}s)  {res.detail}")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bounce-lab",
        description="Event-driven plate-bounce simulators and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario, write events + summary")
    p.add_argument("config")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="run a grid of scenarios, write sweep.csv")
    p.add_argument("config")
    p.add_argument("--grid", required=True, help="e.g. 't0=-0.9:-0.1:9,v0=10:20:5'")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("portrait", help="emit section-coordinate rows")
    p.add_argument("config")
    p.add_argument("--coords", choices=("tv", "ty"), default="tv")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(fn=cmd_portrait)

    p = sub.add_parser("validate", help="run the built-in acceptance suite")
    p.add_argument("--only", default="", help="comma-separated criterion numbers")
    p.set_defaults(fn=cmd_validate)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
