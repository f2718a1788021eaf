"""Command-line entry point.

Subcommands: simulate, baseline, sweep-arrivals, search, serve,
dump-reward-shapes. Every run is seeded explicitly and writes a manifest
sufficient to reproduce it byte-for-byte.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, bridge, controllers, events, kernel, metrics, rewards
from .env import EnvConfig, VppEnv
from .errors import VppError
from .events import EventConfig
from .timeseries import NoiseSpec, load_scenario, synthesize_scenario

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

EVENT_CONFIG_KEYS = {
    # Elvis-style key -> EventConfig field
    "num_charging_events": "weekly_arrivals",
    "mean_park": "mean_park",
    "std_deviation_park": "std_park",
    "mean_soc": "mean_soc",
    "std_deviation_soc": "std_soc",
    "n_stations": "n_stations",
    "ev_capacity": "ev_capacity",
}


def load_event_config(path) -> EventConfig:
    """Flat key/value document with the Elvis configuration keys."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    kwargs = {}
    for key, field in EVENT_CONFIG_KEYS.items():
        if key in raw:
            kwargs[field] = raw[key]
    if "arrival_profile" in raw:
        kwargs["arrival_profile"] = np.asarray(raw["arrival_profile"], dtype=np.float64)
    if "weekly_arrivals" in kwargs:
        kwargs["weekly_arrivals"] = int(kwargs["weekly_arrivals"])
    return EventConfig(**kwargs)


def _scenario_from_args(args):
    if args.scenario:
        return load_scenario(args.scenario), {"scenario": str(args.scenario)}
    return (
        synthesize_scenario(args.synthetic_seed),
        {"synthetic_seed": args.synthetic_seed},
    )


def _event_config_from_args(args) -> tuple[EventConfig, dict]:
    if getattr(args, "events", None):
        return load_event_config(args.events), {"events": str(args.events)}
    return EventConfig(), {"events": "defaults"}


def _make_env(args, weekly_arrivals=None):
    dataset, scenario_meta = _scenario_from_args(args)
    event_config, event_meta = _event_config_from_args(args)
    if weekly_arrivals is not None:
        from dataclasses import replace

        event_config = replace(event_config, weekly_arrivals=weekly_arrivals)
    env = VppEnv(dataset, event_config, EnvConfig(), NoiseSpec())
    return env, {**scenario_meta, **event_meta}


def _write_manifest(out_dir: Path, command: str, seeds, meta: dict) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "kernel_backend": kernel.BACKEND,
        "seeds": list(seeds),
        "config": meta,
    }
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()
    payload["config_hash"] = digest
    (out_dir / "manifest.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_report(out_dir: Path, name: str, report: dict) -> None:
    lines = [f"{key}: {value}" for key, value in report.items()]
    (out_dir / f"{name}.txt").write_text("\n".join(lines) + "\n")
    (out_dir / f"{name}.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")


def _write_histogram(out_dir: Path, trace) -> None:
    hist = metrics.load_histogram(trace)
    with open(out_dir / "histogram.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low_kw", "bin_high_kw", "count"])
        for lo, hi, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(count)])


def cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    env, meta = _make_env(args)
    policy = controllers.make_policy(args.policy, seed=args.seed)
    trace = controllers.run_episode(env, policy, args.seed)
    params = metrics.key_parameters(trace)

    trace.to_csv(out_dir / "trace.csv")
    report = metrics.report(params, trace)
    report["policy"] = policy.name
    _write_report(out_dir, "metrics", report)
    _write_histogram(out_dir, trace)
    breakdown = trace.metadata.get("reward_breakdown", {})
    _write_report(out_dir, "reward_breakdown", breakdown)
    _write_manifest(
        out_dir, "simulate", [args.seed], {**meta, "policy": policy.name}
    )
    print(f"simulate: policy={policy.name} seed={args.seed}")
    print(f"  avg departure energy: {params.avg_departure_energy:.2f} kWh")
    print(f"  grid import: {params.grid_energy_used:.1f} kWh, "
          f"export: {params.re2v_unused:.1f} kWh, cost: {params.grid_cost:.2f} EUR")
    print(f"  cumulative reward: {params.cumulative_reward:.1f}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, scenario_meta = _scenario_from_args(args)
    event_config, event_meta = _event_config_from_args(args)
    event_list = events.generate_events(event_config, args.seed)
    schedule = events.assign_stations(event_list, event_config)
    trace = events.uncontrolled_baseline(schedule, dataset, event_config)
    params = metrics.key_parameters(trace)

    trace.to_csv(out_dir / "trace.csv")
    report = metrics.report(params, trace)
    report["dropped_events"] = len(schedule.dropped)
    _write_report(out_dir, "metrics", report)
    _write_histogram(out_dir, trace)
    events.events_to_csv(event_list, out_dir / "events.csv")
    _write_manifest(out_dir, "baseline", [args.seed], {**scenario_meta, **event_meta})
    print(f"baseline: {params.charging_event_count} departures, "
          f"avg energy {params.avg_departure_energy:.2f} kWh, "
          f"import {params.grid_energy_used:.1f} kWh")
    return EXIT_OK


def _departure_bands(energies: np.ndarray, capacity: float) -> dict:
    pct = 100.0 * energies / capacity
    return {
        "pct_below_22_5": float(np.mean(pct < 22.5)),
        "pct_22_5_to_52_5": float(np.mean((pct >= 22.5) & (pct < 52.5))),
        "pct_52_5_to_97_5": float(np.mean((pct >= 52.5) & (pct < 97.5))),
        "pct_above_97_5": float(np.mean(pct >= 97.5)),
    }


def cmd_sweep_arrivals(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    arrivals = [int(x) for x in args.arrivals.split(",")]
    rows = []
    for weekly in arrivals:
        env, meta = _make_env(args, weekly_arrivals=weekly)
        policy = controllers.make_policy(args.policy, seed=args.seed)
        energies = []
        param_list = []
        balanced = []
        generated = 0
        for episode in range(args.episodes):
            seed = args.seed + 1000 * weekly + episode
            trace = controllers.run_episode(env, policy, seed)
            params = metrics.key_parameters(trace)
            param_list.append(params)
            energies.append(trace.departure_energies)
            balanced.append(metrics.load_histogram(trace).balanced_fraction(0.1))
            generated += len(env.events)
        pooled = np.concatenate(energies)
        q1, median, q3 = np.percentile(pooled, [25, 50, 75])
        row = {
            "weekly_arrivals": weekly,
            "episodes": args.episodes,
            "generated_events": generated,
            "departed_events": int(pooled.size),
            "q1_kwh": float(q1),
            "median_kwh": float(median),
            "q3_kwh": float(q3),
            **_departure_bands(pooled, env.config.ev_capacity),
            "balanced_fraction_0_1kw": float(np.mean(balanced)),
            "grid_import_kwh": float(np.mean([p.grid_energy_used for p in param_list])),
            "grid_export_kwh": float(np.mean([p.re2v_unused for p in param_list])),
            "grid_cost_eur": float(np.mean([p.grid_cost for p in param_list])),
            "avg_departure_kwh": float(np.mean([p.avg_departure_energy for p in param_list])),
            "cumulative_reward": float(np.mean([p.cumulative_reward for p in param_list])),
        }
        rows.append(row)
        print(f"arrivals={weekly}: median departure {row['median_kwh']:.2f} kWh, "
              f"balanced {row['balanced_fraction_0_1kw']:.3f}")

    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    _write_manifest(
        out_dir,
        "sweep-arrivals",
        [args.seed],
        {"arrivals": arrivals, "episodes": args.episodes, "policy": args.policy},
    )
    return EXIT_OK


def cmd_search(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, scenario_meta = _scenario_from_args(args)
    event_config, event_meta = _event_config_from_args(args)
    horizon = args.horizon or EnvConfig().horizon

    def factory():
        return VppEnv(dataset, event_config, EnvConfig(horizon=horizon), NoiseSpec())

    result = controllers.cross_entropy_search(
        factory,
        generations=args.generations,
        population=args.population,
        seed=args.seed,
        episode_seed=args.seed,
    )
    best = {
        "discharge_reserve": result.best_params.discharge_reserve,
        "charge_target": result.best_params.charge_target,
        "surplus_deadband": result.best_params.surplus_deadband,
        "best_score": result.best_score,
    }
    _write_report(out_dir, "best_params", best)
    with open(out_dir / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best", "mean", "std"])
        for row in result.history:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    _write_manifest(
        out_dir,
        "search",
        [args.seed],
        {**scenario_meta, **event_meta, "generations": args.generations,
         "population": args.population, "horizon": horizon},
    )
    print(f"search: best score {result.best_score:.1f} at {best}")
    return EXIT_OK


def cmd_serve(args) -> int:
    def factory():
        env, _ = _make_env(args)
        return env

    if args.socket is not None and args.stdio:
        raise VppError("choose either --stdio or --socket, not both")
    if args.socket is not None:
        bridge.serve_socket(factory, args.socket, max_sessions=args.max_sessions)
    else:
        bridge.serve_stdio(factory)
    return EXIT_OK


def cmd_dump_reward_shapes(args) -> int:
    writer = csv.writer(sys.stdout)
    writer.writerow(["shape_name", "x", "value"])
    for name, x, value in rewards.dump_shapes():
        writer.writerow([name, repr(float(x)), repr(float(value))])
    return EXIT_OK


def _add_scenario_args(parser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--scenario", help="scenario CSV path")
    group.add_argument("--synthetic-seed", type=int, default=0,
                       help="seed for the synthetic scenario generator")
    parser.add_argument("--events", help="event-config YAML (Elvis-style keys)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vppsim",
        description="Microgrid EV-charging simulator and controller harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one controlled episode")
    _add_scenario_args(p)
    p.add_argument("--policy", default="greedy",
                   choices=sorted(controllers.POLICY_BUILDERS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", help="run the uncontrolled charging baseline")
    _add_scenario_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep-arrivals", help="sweep the weekly arrival count")
    _add_scenario_args(p)
    p.add_argument("--arrivals", default="10,15,20,25,30,35")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--policy", default="greedy",
                   choices=sorted(controllers.POLICY_BUILDERS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_sweep_arrivals)

    p = sub.add_parser("search", help="cross-entropy search over threshold policies")
    _add_scenario_args(p)
    p.add_argument("--generations", type=int, default=8)
    p.add_argument("--population", type=int, default=12)
    p.add_argument("--horizon", type=int, default=None,
                   help="episode length in steps (default: full year)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("serve", help="serve the environment to external agents")
    _add_scenario_args(p)
    p.add_argument("--stdio", action="store_true", help="serve over stdin/stdout")
    p.add_argument("--socket", type=int, default=None, metavar="PORT",
                   help="serve on a local TCP port (0 picks one)")
    p.add_argument("--max-sessions", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("dump-reward-shapes", help="print reward anchors as CSV")
    p.set_defaults(func=cmd_dump_reward_shapes)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except VppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
