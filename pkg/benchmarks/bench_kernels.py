#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Two levels: the raw kernel functions (per-step transition and the
uncontrolled year rollout), and a whole greedy episode through the env on
each lane. Run after `pip install -e .`:

    python benchmarks/bench_kernels.py [--steps 200000]
"""
import argparse
import time

import numpy as np

from vppsim import EnvConfig, EventConfig, synthesize_scenario
from vppsim import _pykernel
from vppsim.events import assign_stations, generate_events

try:
    from vppsim import _speedups
except ImportError:
    _speedups = None


def bench_step_core(impl, n_calls: int) -> float:
    cfg = EnvConfig()
    rng = np.random.default_rng(0)
    actions = rng.integers(0, 3, size=(256, 4)).astype(np.int64)
    house_rw = rng.normal(0, 6, size=256)
    initial = rng.uniform(30, 90, size=4)
    energies = initial.copy()
    occupied = np.ones(4, dtype=np.uint8)
    powers = np.zeros(4)
    applied = np.zeros(4, dtype=np.int64)
    start = time.perf_counter()
    for i in range(n_calls):
        j = i & 255
        if j == 0:
            energies[:] = initial  # periodic reset keeps clamps off the hot path
        impl.step_core(
            actions[j], energies, occupied, house_rw[j],
            cfg.station_min_power, cfg.station_rated_power, cfg.station_max_power,
            cfg.dt, cfg.energy_floor, cfg.energy_ceiling,
            cfg.force_charge_below, cfg.no_discharge_below,
            powers, applied,
        )
    return time.perf_counter() - start


def bench_rollout(impl, schedule, dataset, n_calls: int) -> float:
    horizon, n = schedule.occupancy.shape
    outs = [np.zeros((horizon, n)), np.zeros((horizon, n))] + [
        np.zeros(horizon) for _ in range(3)
    ]
    start = time.perf_counter()
    for _ in range(n_calls):
        impl.uncontrolled_rollout(
            schedule.occupancy, schedule.arrival_energies(),
            dataset.house_rw_load, dataset.price,
            100.0, 11.0, 0.25, *outs,
        )
    return time.perf_counter() - start


def bench_episode(backend_env: str) -> float:
    # fresh interpreter state per lane comes from the env var read at import,
    # so this measures through a subprocess
    import os
    import subprocess
    import sys

    env = dict(os.environ)
    if backend_env == "python":
        env["VPPSIM_PURE_KERNEL"] = "1"
    else:
        env.pop("VPPSIM_PURE_KERNEL", None)
    code = (
        "import time, vppsim\n"
        "from vppsim.controllers import greedy_balancer, run_episode\n"
        "ds = vppsim.synthesize_scenario(0)\n"
        "env = vppsim.VppEnv(ds)\n"
        "run_episode(env, greedy_balancer(), 0)  # warm-up\n"
        "t0 = time.perf_counter()\n"
        "run_episode(env, greedy_balancer(), 1)\n"
        "print(time.perf_counter() - t0)\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    return float(out.stdout.strip())


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--rollouts", type=int, default=20)
    args = parser.parse_args()

    if _speedups is None:
        print("compiled kernel not built; only the python lane is available")

    dataset = synthesize_scenario(0)
    cfg = EventConfig()
    schedule = assign_stations(generate_events(cfg, 0), cfg)

    lanes = [("python", _pykernel)] + ([("compiled", _speedups)] if _speedups else [])

    print(f"step_core: {args.steps} calls")
    times = {}
    for name, impl in lanes:
        times[name] = bench_step_core(impl, args.steps)
        rate = args.steps / times[name]
        print(f"  {name:9s} {times[name]:7.3f} s   {rate / 1e6:6.2f} M steps/s")
    if len(times) == 2:
        print(f"  speedup   {times['python'] / times['compiled']:.1f}x")

    print(f"uncontrolled_rollout: {args.rollouts} simulated years")
    times = {}
    for name, impl in lanes:
        times[name] = bench_rollout(impl, schedule, dataset, args.rollouts)
        print(f"  {name:9s} {times[name]:7.3f} s   {times[name] / args.rollouts * 1e3:7.1f} ms/year")
    if len(times) == 2:
        print(f"  speedup   {times['python'] / times['compiled']:.1f}x")

    print("greedy episode through the env (one simulated year)")
    for name in [n for n, _ in lanes]:
        elapsed = bench_episode(name)
        print(f"  {name:9s} {elapsed:7.3f} s/episode")


if __name__ == "__main__":
    main()
