"""The microgrid control environment.

One episode is one simulated year: 35,041 quarter-hour observations (one
reset plus 35,040 steps). Each step the agent picks Idle/Charge/Discharge
per station; the actual power magnitude is evaluated adaptively so a single
compensating station drives the net load to zero whenever it can. Invalid
choices are substituted, not rejected, and the substitution rules are the
same ones the action mask reports.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernel, rewards
from .errors import ConfigError, LifecycleError
from .events import EventConfig, assign_stations, generate_events, uncontrolled_baseline
from .metrics import KeyParameters, SimulationTrace, key_parameters
from .timeseries import (
    DT_HOURS,
    NoiseSpec,
    ScenarioDataset,
    apply_episode_noise,
    dataset_goal,
)

IDLE, CHARGE, DISCHARGE = 0, 1, 2
N_ACTION_VALUES = 3


@dataclass(frozen=True)
class EnvConfig:
    """Station and battery limits plus the episode horizon."""

    n_stations: int = 4
    station_min_power: float = 1.0     # kW
    station_rated_power: float = 3.7   # kW
    station_max_power: float = 11.0    # kW
    dt: float = DT_HOURS               # hours
    ev_capacity: float = 100.0         # kWh
    energy_floor: float = 0.1          # kWh, hard discharge limit
    energy_ceiling: float = 99.9       # kWh, hard charge limit
    force_charge_below: float = 10.0   # kWh: must charge below this
    no_discharge_below: float = 20.0   # kWh: may not discharge below this
    horizon: int = 35041

    def __post_init__(self):
        if not 0 < self.station_min_power <= self.station_rated_power <= self.station_max_power:
            raise ConfigError("station powers must satisfy 0 < min <= rated <= max")
        ordered = (
            self.energy_floor
            < self.force_charge_below
            < self.no_discharge_below
            < self.energy_ceiling
            < self.ev_capacity
        )
        if not ordered:
            raise ConfigError(
                "energy thresholds must satisfy floor < force-charge < "
                "no-discharge < ceiling < capacity"
            )
        if self.horizon < 2:
            raise ConfigError("horizon must cover at least one step")


@dataclass(frozen=True)
class Observation:
    """The agent-visible slice of the state."""

    ev_power: float                 # kW, summed signed station power
    total_load: float               # kW, households + renewables + EVs
    available_energies: np.ndarray  # kWh per station, 0 when empty

    def as_dict(self) -> dict:
        return {
            "ev_power": self.ev_power,
            "total_load": self.total_load,
            "available_energies": [float(x) for x in self.available_energies],
        }


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: dict


def action_index(station: int, value: int, n_stations: int, n_values: int = 7) -> int:
    """Flat id of (station, action value) in the row-major action table.

    The table enumerates action values row by row, so the id is
    ``value * n_stations + station`` and the largest id is
    ``n_stations * n_values - 1``.
    """
    if not 0 <= station < n_stations:
        raise ValueError(f"station {station} outside [0, {n_stations})")
    if not 0 <= value < n_values:
        raise ValueError(f"action value {value} outside [0, {n_values})")
    return value * n_stations + station


def adaptive_power(
    actions,
    energies,
    occupied,
    house_rw_load: float,
    cfg: EnvConfig,
):
    """Evaluate the per-station power for one step without touching state.

    Invalid actions are substituted first (empty stations idle, nearly empty
    batteries force-charge, low or full ones fall back to idle); then each
    non-idle station gets either the power that cancels the residual load it
    sees (clamped to the station limits) or the rated power, and finally the
    battery bounds trim whatever would over- or under-shoot.

    Returns (powers_kw, applied_actions, ev_power, total_load).
    """
    actions = np.asarray(actions, dtype=np.int64)
    energies = np.array(energies, dtype=np.float64)
    occupied = np.asarray(occupied, dtype=np.uint8)
    powers = np.zeros(len(actions))
    applied = np.zeros(len(actions), dtype=np.int64)
    ev_power, total_load = kernel.step_core(
        actions,
        energies,
        occupied,
        house_rw_load,
        cfg.station_min_power,
        cfg.station_rated_power,
        cfg.station_max_power,
        cfg.dt,
        cfg.energy_floor,
        cfg.energy_ceiling,
        cfg.force_charge_below,
        cfg.no_discharge_below,
        powers,
        applied,
    )
    return powers, applied, ev_power, total_load


def station_mask(occupied: bool, energy: float, cfg: EnvConfig) -> tuple[bool, bool, bool]:
    """Validity of (Idle, Charge, Discharge) for one station."""
    if not occupied:
        return (True, False, False)
    if energy < cfg.force_charge_below:
        return (False, True, False)
    if energy < cfg.no_discharge_below:
        return (True, True, False)
    if energy >= cfg.energy_ceiling:
        return (True, False, True)
    return (True, True, True)


class VppEnv:
    """Single-year microgrid episode over a scenario dataset.

    Instances are strictly single-threaded; construct one per worker. The
    base dataset is shared and immutable, every reset derives a fresh noisy
    copy plus a fresh charging-event schedule from the episode seed.
    """

    def __init__(
        self,
        dataset: ScenarioDataset,
        event_config: EventConfig | None = None,
        env_config: EnvConfig | None = None,
        noise: NoiseSpec | None = None,
    ):
        self.base_dataset = dataset
        self.event_config = event_config or EventConfig()
        self.config = env_config or EnvConfig()
        self.noise = noise if noise is not None else NoiseSpec()
        if self.config.horizon > len(dataset):
            raise ConfigError(
                f"horizon {self.config.horizon} exceeds dataset length {len(dataset)}"
            )
        if self.event_config.n_stations != self.config.n_stations:
            raise ConfigError("event and env configs disagree on station count")
        if self.event_config.ev_capacity != self.config.ev_capacity:
            raise ConfigError("event and env configs disagree on EV capacity")
        self._done = True
        self._t = 0

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed: int) -> Observation:
        cfg = self.config
        seeds = np.random.SeedSequence(seed).generate_state(2)
        self.seed = seed
        self.events = generate_events(self.event_config, int(seeds[0]))
        self.schedule = assign_stations(self.events, self.event_config)
        self.dataset = apply_episode_noise(self.base_dataset, self.noise, int(seeds[1]))

        baseline_trace = uncontrolled_baseline(
            self.schedule, self.dataset, self.event_config, cfg.station_max_power
        )
        self.baseline: KeyParameters = key_parameters(baseline_trace)
        self.goal = dataset_goal(
            self.dataset,
            event_count=max(len(self.schedule.assignments), 1),
            mean_arrival_soc=self.event_config.mean_soc,
            ev_capacity=cfg.ev_capacity,
        )
        self._arrival_energy = self.schedule.arrival_energies()

        n, h = cfg.n_stations, cfg.horizon
        self._occupancy = self.schedule.occupancy
        self._energies = np.zeros(n)
        self._current_ev = np.zeros(n, dtype=np.int64)
        self._powers = np.zeros(n)
        self._applied = np.zeros(n, dtype=np.int64)
        self._occupied = np.zeros(n, dtype=np.uint8)

        self._trace_power = np.zeros((h, n))
        self._trace_energy = np.zeros((h, n))
        self._trace_ev = np.zeros(h)
        self._trace_load = np.zeros(h)
        self._trace_cost = np.zeros(h)
        self._trace_reward = np.zeros(h)
        self._load_rewards = np.zeros(h)
        self._departure_rewards = np.zeros(h)
        self._departures: list[tuple[int, int, float]] = []
        self._final_parts: Optional[dict] = None
        self._breakdown = None

        self.grid_import_kwh = 0.0
        self.grid_export_kwh = 0.0
        self.grid_cost_eur = 0.0
        self.cumulative_reward = 0.0

        self._t = 0
        self._done = False
        self._state_version = 0
        self._mask_version = -1
        self._mask_cache = None
        self._step_departures: list = []
        self._seat_arrivals(0)
        load0 = float(self.dataset.house_rw_load[0])
        self._trace_load[0] = load0
        self._trace_cost[0] = load0 * cfg.dt * float(self.dataset.price[0])
        self._trace_energy[0] = self._energies
        self._account_grid(load0, float(self.dataset.price[0]))
        return self._observation(0.0, load0)

    def _seat_arrivals(self, t: int) -> None:
        cfg = self.config
        row = self._occupancy[t]
        for s in range(cfg.n_stations):
            ev = int(row[s])
            if ev != 0 and ev != self._current_ev[s]:
                self._current_ev[s] = ev
                # Seat within the controllable band so the battery bounds
                # hold even for pathological arrival draws.
                self._energies[s] = min(
                    max(self._arrival_energy[ev], cfg.energy_floor), cfg.ev_capacity
                )
                self._occupied[s] = 1

    def _process_departures(self, t: int) -> float:
        """Remove EVs whose stay ends at step t; returns their reward."""
        cfg = self.config
        row = self._occupancy[t]
        reward = 0.0
        self._step_departures = []
        for s in range(cfg.n_stations):
            ev = int(self._current_ev[s])
            if ev != 0 and int(row[s]) != ev:
                energy = float(self._energies[s])
                self._departures.append((t, ev, energy))
                self._step_departures.append([ev, energy])
                reward += rewards.departure_reward(energy, cfg.ev_capacity)
                self._current_ev[s] = 0
                self._energies[s] = 0.0
                self._occupied[s] = 0
        return reward

    def _account_grid(self, total_load: float, price: float) -> None:
        dt = self.config.dt
        if total_load >= 0.0:
            self.grid_import_kwh += total_load * dt
            if price > 0.0:
                self.grid_cost_eur += total_load * dt * price
        else:
            self.grid_export_kwh += -total_load * dt

    def _observation(self, ev_power: float, total_load: float) -> Observation:
        return Observation(
            ev_power=ev_power,
            total_load=total_load,
            available_energies=self._energies.copy(),
        )

    def action_mask(self) -> np.ndarray:
        """Boolean [n_stations, 3] validity matrix for the current state."""
        if self._mask_version == self._state_version:
            return self._mask_cache
        mask = np.zeros((self.config.n_stations, N_ACTION_VALUES), dtype=bool)
        for s in range(self.config.n_stations):
            mask[s] = station_mask(
                bool(self._occupied[s]), float(self._energies[s]), self.config
            )
        self._mask_cache = mask
        self._mask_version = self._state_version
        return mask

    def step(self, action) -> StepResult:
        if self._done:
            raise LifecycleError("step() called on a finished episode; reset first")
        cfg = self.config
        action = np.asarray(action, dtype=np.int64)
        if action.shape != (cfg.n_stations,) or any(
            a < 0 or a > 2 for a in action.tolist()
        ):
            raise ValueError(f"action must be {cfg.n_stations} values in {{0,1,2}}")
        mask = self.action_mask()
        valid = [bool(mask[s, action[s]]) for s in range(cfg.n_stations)]

        t = self._t + 1
        dep_reward = self._process_departures(t)
        self._seat_arrivals(t)

        house_rw = float(self.dataset.house_rw_load[t])
        price = float(self.dataset.price[t])
        ev_power, total_load = kernel.step_core(
            action,
            self._energies,
            self._occupied,
            house_rw,
            cfg.station_min_power,
            cfg.station_rated_power,
            cfg.station_max_power,
            cfg.dt,
            cfg.energy_floor,
            cfg.energy_ceiling,
            cfg.force_charge_below,
            cfg.no_discharge_below,
            self._powers,
            self._applied,
        )
        self._account_grid(total_load, price)

        load_reward = rewards.load_reward(total_load)
        self._load_rewards[t] = load_reward
        self._departure_rewards[t] = dep_reward
        reward = load_reward + dep_reward
        done = t == cfg.horizon - 1
        if done:
            reward += self._finish(t)
        self._state_version += 1
        info = {
            "step": t,
            "station_power": self._powers.tolist(),
            "applied_action": self._applied.tolist(),
            "action_valid": valid,
            "departures": self._step_departures,
            "house_rw_load": house_rw,
            "ev_power": ev_power,
        }
        if done:
            info["final_reward"] = dict(self._final_parts)

        self._trace_power[t] = self._powers
        self._trace_energy[t] = self._energies
        self._trace_ev[t] = ev_power
        self._trace_load[t] = total_load
        self._trace_cost[t] = total_load * cfg.dt * price
        self._trace_reward[t] = reward
        self.cumulative_reward += reward
        info["cumulative_reward"] = self.cumulative_reward

        self._t = t
        self._done = done
        return StepResult(
            observation=self._observation(ev_power, total_load),
            reward=reward,
            done=done,
            info=info,
        )

    def _finish(self, t: int) -> float:
        """Force-depart whatever is still connected, grant the final reward."""
        cfg = self.config
        extra = 0.0
        for s in range(cfg.n_stations):
            ev = int(self._current_ev[s])
            if ev != 0:
                energy = float(self._energies[s])
                self._departures.append((t, ev, energy))
                self._step_departures.append([ev, energy])
                extra += rewards.departure_reward(energy, cfg.ev_capacity)
                self._current_ev[s] = 0
                self._energies[s] = 0.0
                self._occupied[s] = 0
        if extra:
            self._departure_rewards[t] += extra

        interim = KeyParameters(
            grid_energy_used=self.grid_import_kwh,
            re2v_unused=self.grid_export_kwh,
            grid_cost=self.grid_cost_eur,
            avg_departure_energy=(
                float(np.mean([e for _, _, e in self._departures]))
                if self._departures
                else 0.0
            ),
            cumulative_reward=0.0,
            charging_event_count=len(self._departures),
        )
        final_total, self._final_parts = rewards.final_reward(
            interim, self.baseline, self.goal, cfg.ev_capacity
        )
        return extra + final_total

    # -- results -----------------------------------------------------------

    def trace(self) -> SimulationTrace:
        if not self._done:
            raise LifecycleError("trace() is only available after the episode ends")
        h = self.config.horizon
        breakdown = rewards.RewardBreakdown.from_logs(
            self._load_rewards[:h], self._departure_rewards[:h], self._final_parts
        )
        self._breakdown = breakdown
        return SimulationTrace(
            household=self.dataset.household_power[:h].copy(),
            renewable=self.dataset.renewable_power[:h].copy(),
            ev_power=self._trace_ev,
            total_load=self._trace_load,
            price=self.dataset.price[:h].copy(),
            step_cost=self._trace_cost,
            station_power=self._trace_power,
            station_energy=self._trace_energy,
            reward=self._trace_reward,
            departures=tuple(self._departures),
            label="controlled",
            seed=self.seed,
            cumulative_reward=breakdown.cumulative,
            metadata={
                "reward_breakdown": {
                    "load_reward_total": breakdown.load_reward_total,
                    "departure_reward_total": breakdown.departure_reward_total,
                    "final_avg_energy": breakdown.final_avg_energy,
                    "final_grid_import": breakdown.final_grid_import,
                    "final_grid_export": breakdown.final_grid_export,
                    "final_grid_cost": breakdown.final_grid_cost,
                    "cumulative": breakdown.cumulative,
                },
                "goal_max_avg_departure_energy": self.goal.max_avg_departure_energy,
                "baseline_grid_energy_used": self.baseline.grid_energy_used,
                "baseline_re2v_unused": self.baseline.re2v_unused,
                "baseline_grid_cost": self.baseline.grid_cost,
            },
        )

    def spec(self) -> dict:
        """Shapes and limits an external agent needs to connect."""
        cfg = self.config
        return {
            "action_space": [N_ACTION_VALUES] * cfg.n_stations,
            "n_stations": cfg.n_stations,
            "observation_keys": ["ev_power", "total_load", "available_energies"],
            "horizon": cfg.horizon,
            "dt_hours": cfg.dt,
            "ev_capacity_kwh": cfg.ev_capacity,
            "station_power_kw": {
                "min": cfg.station_min_power,
                "rated": cfg.station_rated_power,
                "max": cfg.station_max_power,
            },
        }
