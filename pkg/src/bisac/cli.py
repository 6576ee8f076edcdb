"""Command-line front end: config ingestion, episode runs, sweeps, CSV/SVG export.

Artifacts are bit-stable: floats are serialized with 17 significant digits and
every output directory carries a manifest (command, config hash, seeds, tool
version) sufficient to reproduce it byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import BisacError, ConfigError, InvalidConfig
from .plotting import polyline_chart
from .sim import (DEFAULT_RAW, EpisodeLog, Policy, ScenarioConfig, calibrate_psi,
                  resolve_config, run_episode, run_sweep, summarize)

SLOT_COLUMNS = ("n", "true_x", "true_y", "est_x", "est_y", "pred_crb", "crb_at_truth",
                "snr_db", "wc_snr_db", "q1x", "q1y", "q2x", "q2y", "d12",
                "sca_iters", "converged")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def load_raw_config(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse configuration {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    return raw


def parse_config(path: str) -> ScenarioConfig:
    """Load and resolve a scenario configuration file."""
    try:
        return resolve_config(load_raw_config(path))
    except InvalidConfig as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(config: ScenarioConfig) -> str:
    canonical = json.dumps(config.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class _Writer:
    """Tracks written files so a failed command leaves no partial outputs."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.written = []

    def path(self, *parts) -> str:
        full = os.path.join(self.out_dir, *parts)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def write_text(self, relpath: str, text: str) -> None:
        full = self.path(relpath)
        with open(full, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.written.append(full)

    def rollback(self) -> None:
        for full in self.written:
            try:
                os.remove(full)
            except OSError:
                pass


def _csv(rows, columns) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def slot_rows(episode: EpisodeLog):
    rows = []
    for s in episode.slots:
        rows.append({
            "n": s.n,
            "true_x": s.true_state.x,
            "true_y": s.true_state.y,
            "est_x": s.belief.x_hat.x,
            "est_y": s.belief.x_hat.y,
            "pred_crb": s.pred_crb,
            "crb_at_truth": s.crb_truth,
            "snr_db": s.snr_db,
            "wc_snr_db": s.wc_snr_db,
            "q1x": s.q1.qx,
            "q1y": s.q1.qy,
            "q2x": s.q2.qx,
            "q2y": s.q2.qy,
            "d12": float(np.linalg.norm(s.q1.horizontal - s.q2.horizontal)),
            "sca_iters": s.sca_iterations,
            "converged": s.converged,
        })
    return rows


def trace_rows(episode: EpisodeLog):
    rows = []
    for s in episode.slots:
        for i, obj in enumerate(s.trace.objectives, start=1):
            rows.append({
                "n": s.n,
                "iteration": i,
                "objective": obj,
                "step_norm": s.trace.step_norms[i - 1],
            })
    return rows


def _write_episode(writer: _Writer, subdir: str, episode: EpisodeLog, svg: bool) -> None:
    prefix = os.path.join(subdir) if subdir else ""
    writer.write_text(os.path.join(prefix, "slots.csv"),
                      _csv(slot_rows(episode), SLOT_COLUMNS))
    writer.write_text(os.path.join(prefix, "trace.csv"),
                      _csv(trace_rows(episode), ("n", "iteration", "objective", "step_norm")))
    if svg:
        rows = slot_rows(episode)
        polyline_chart(
            {"predicted": [(r["n"], r["pred_crb"]) for r in rows],
             "at truth": [(r["n"], r["crb_at_truth"]) for r in rows]},
            "position CRB per slot", "slot", "CRB [m^2]",
            writer.path(prefix, "crb_vs_slot.svg"), log_y=True)
        writer.written.append(writer.path(prefix, "crb_vs_slot.svg"))
        polyline_chart(
            {"target": [(r["true_x"], r["true_y"]) for r in rows],
             "estimate": [(r["est_x"], r["est_y"]) for r in rows],
             "uav-1": [(r["q1x"], r["q1y"]) for r in rows],
             "uav-2": [(r["q2x"], r["q2y"]) for r in rows]},
            "horizontal trajectories", "x [m]", "y [m]",
            writer.path(prefix, "trajectories.svg"))
        writer.written.append(writer.path(prefix, "trajectories.svg"))
        tr = trace_rows(episode)
        polyline_chart(
            {"objective": [(i, r["objective"]) for i, r in enumerate(tr, start=1)]},
            "SCA accepted objective (all slots, concatenated)", "iteration", "CRB [m^2]",
            writer.path(prefix, "sca_trace.svg"), log_y=True)
        writer.written.append(writer.path(prefix, "sca_trace.svg"))


def _summary_csv(episodes) -> str:
    table = summarize(episodes)
    columns = ("policy", "episodes", "rmse_pos", "mean_crb", "max_crb",
               "snr_satisfaction_rate", "mean_inter_uav_dist", "mean_q1_target_dist",
               "constraint_violations", "snr_infeasible_slots", "convergence_rate")
    rows = []
    for row in table:
        out = dict(row)
        out["policy"] = row["policy"]
        rows.append(out)
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row[c]
            cells.append(v if isinstance(v, str) else _fmt(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _manifest(command: str, args, config: ScenarioConfig, seeds) -> str:
    payload = {
        "command": command,
        "config_path": os.path.abspath(args.config) if args.config else None,
        "config_sha256": config_hash(config),
        "seeds": list(seeds),
        "output_dir": os.path.abspath(args.out),
        "tool_version": __version__,
        "policy": getattr(args, "policy", None),
        "fixed_q2": getattr(args, "fixed_q2", None),
        "param": getattr(args, "param", None),
        "values": getattr(args, "values", None),
        "strict": bool(getattr(args, "strict", False)),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _parse_seeds(args) -> list:
    if args.seeds:
        lo, sep, hi = args.seeds.partition("..")
        if not sep:
            raise ConfigError("--seeds expects a range like 1..20")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError as exc:
            raise ConfigError("--seeds bounds must be integers") from exc
        if hi_i < lo_i:
            raise ConfigError("--seeds range is empty")
        return list(range(lo_i, hi_i + 1))
    return [args.seed]


def _parse_policy(args) -> Policy:
    kind = args.policy.replace("-", "_")
    fixed = None
    if args.fixed_q2 is not None:
        try:
            x, y = (float(v) for v in args.fixed_q2.split(","))
        except ValueError as exc:
            raise ConfigError("--fixed-q2 expects X,Y") from exc
        fixed = (x, y)
    if kind == "semi_dynamic" and fixed is None:
        raise ConfigError("policy semi-dynamic requires --fixed-q2 X,Y")
    return Policy(kind, fixed)


def _check_strict(args, episodes) -> None:
    if getattr(args, "strict", False):
        bad = sum(ep.summary["snr_infeasible_slots"] for ep in episodes)
        if bad:
            raise BisacError(f"strict mode: {bad} slots could not certify the SNR threshold")


def cmd_run(args, command_name: str = "run") -> int:
    config = parse_config(args.config) if args.config else resolve_config({})
    policy = _parse_policy(args)
    seeds = _parse_seeds(args)
    episodes = [run_episode(config, policy, seed) for seed in seeds]
    _check_strict(args, episodes)
    writer = _Writer(args.out)
    try:
        if len(episodes) == 1:
            _write_episode(writer, "", episodes[0], args.svg)
        else:
            for seed, ep in zip(seeds, episodes):
                _write_episode(writer, f"seed_{seed:04d}", ep, args.svg)
        writer.write_text("summary.csv", _summary_csv(episodes))
        writer.write_text("manifest.json", _manifest(command_name, args, config, seeds))
    except Exception:
        writer.rollback()
        raise
    return 0


def cmd_sweep(args) -> int:
    raw = load_raw_config(args.config) if args.config else {}
    try:
        values = [json.loads(v) for v in args.values.split(",")]
    except json.JSONDecodeError as exc:
        raise ConfigError("--values expects a comma-separated list of numbers") from exc
    policy = _parse_policy(args)
    seeds = _parse_seeds(args)
    episodes = run_sweep(raw, args.param, values, seeds, policy)
    _check_strict(args, episodes)
    writer = _Writer(args.out)
    per_value = len(seeds)
    try:
        for vi, value in enumerate(values):
            chunk = episodes[vi * per_value:(vi + 1) * per_value]
            subdir = f"{args.param}={value:g}"
            if len(chunk) == 1:
                _write_episode(writer, subdir, chunk[0], args.svg)
            else:
                for seed, ep in zip(seeds, chunk):
                    _write_episode(writer, os.path.join(subdir, f"seed_{seed:04d}"),
                                   ep, args.svg)
            writer.write_text(os.path.join(subdir, "summary.csv"), _summary_csv(chunk))
        config = resolve_config(raw)
        writer.write_text("manifest.json", _manifest("sweep", args, config, seeds))
    except Exception:
        writer.rollback()
        raise
    return 0


def cmd_calibrate_psi(args) -> int:
    config = parse_config(args.config) if args.config else resolve_config({})
    psi = calibrate_psi(config, trials=args.trials, coverage=args.coverage, seed=args.seed)
    writer = _Writer(args.out)
    try:
        writer.write_text("psi.json", json.dumps({
            "psi": psi,
            "trials": args.trials,
            "coverage": args.coverage,
            "seed": args.seed,
        }, indent=2, sort_keys=True) + "\n")
        writer.write_text("manifest.json", _manifest("calibrate-psi", args, config,
                                                     [args.seed]))
    except Exception:
        writer.rollback()
        raise
    print(f"psi = {psi:.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bisac",
        description="Bistatic UAV ISAC tracking simulator and trajectory planner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy_default="proposed"):
        p.add_argument("--config", default=None, help="scenario JSON (defaults built in)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--seeds", default=None, help="inclusive seed range, e.g. 1..20")
        p.add_argument("--policy", default=policy_default,
                       choices=["proposed", "semi-dynamic", "static", "no-comm"])
        p.add_argument("--fixed-q2", default=None, help="X,Y receiver location")
        p.add_argument("--svg", action="store_true", help="also write SVG charts")
        p.add_argument("--strict", action="store_true",
                       help="fail if any slot cannot certify the SNR threshold")

    common(sub.add_parser("run", help="simulate episodes under one policy"))
    common(sub.add_parser("baseline", help="run a comparison policy"),
           policy_default="semi-dynamic")

    p_sweep = sub.add_parser("sweep", help="run episodes across parameter values")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, help="raw configuration key")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")

    p_cal = sub.add_parser("calibrate-psi", help="Monte Carlo channel-error calibration")
    p_cal.add_argument("--config", default=None)
    p_cal.add_argument("--out", required=True)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--trials", type=int, default=10000)
    p_cal.add_argument("--coverage", type=float, default=0.95)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args, "run")
        if args.command == "baseline":
            return cmd_run(args, "baseline")
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "calibrate-psi":
            return cmd_calibrate_psi(args)
        parser.error(f"unknown command {args.command}")
    except (ConfigError, InvalidConfig) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BisacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
