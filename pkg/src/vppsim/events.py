"""Stochastic EV charging events, station occupancy, uncontrolled baseline.

Arrivals are drawn from a weekly probability profile tiled over the year,
parking time and arrival state of charge from Gaussians. The uncontrolled
baseline charges every connected EV at maximum station power until full,
which is the reference behaviour all controllers are compared against.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .errors import ConfigError
from .timeseries import DT_HOURS, STEPS_PER_YEAR, ScenarioDataset

WEEK_BINS = 672  # 7 days of 15-minute steps
MAX_EV_ID = 2147483647


def uniform_weekly_profile() -> np.ndarray:
    return np.full(WEEK_BINS, 1.0 / WEEK_BINS)


@dataclass(frozen=True)
class EventConfig:
    """Charging-event generation parameters (Elvis-style configuration)."""

    weekly_arrivals: int = 20
    mean_park: float = 23.99           # hours; 24 is the parking limit
    std_park: float = 1.0
    mean_soc: float = 0.5
    std_soc: float = 0.1
    ev_capacity: float = 100.0         # kWh
    n_stations: int = 4
    arrival_profile: np.ndarray = field(default_factory=uniform_weekly_profile)

    def __post_init__(self):
        profile = np.ascontiguousarray(self.arrival_profile, dtype=np.float64)
        if profile.shape != (WEEK_BINS,):
            raise ConfigError(f"arrival_profile must have {WEEK_BINS} bins")
        if abs(float(profile.sum()) - 1.0) > 1e-9 or np.any(profile < 0):
            raise ConfigError("arrival_profile must be a probability vector")
        profile.flags.writeable = False
        object.__setattr__(self, "arrival_profile", profile)
        if self.weekly_arrivals < 0:
            raise ConfigError("weekly_arrivals must be >= 0")
        if not 0.0 < self.mean_park <= 24.0:
            raise ConfigError("mean_park must be in (0, 24] hours")
        if not 0.0 <= self.mean_soc <= 1.0:
            raise ConfigError("mean_soc must be in [0, 1]")
        if self.std_park < 0 or self.std_soc < 0:
            raise ConfigError("standard deviations must be >= 0")
        if self.n_stations <= 0 or self.ev_capacity <= 0:
            raise ConfigError("n_stations and ev_capacity must be positive")


@dataclass(frozen=True)
class ChargingEvent:
    ev_id: int
    arrival_step: int
    departure_step: int
    arrival_energy: float  # kWh


def generate_events(config: EventConfig, seed: int) -> list[ChargingEvent]:
    """Draw one year of charging events, deterministically per seed.

    Arrival counts per 15-minute bin are Poisson with the tiled weekly
    profile as intensity, so the yearly total is about 52 * weekly_arrivals.
    Parking time ~ Normal(mean_park, std_park) truncated to (0, 24] h and
    rounded to whole steps; arrival energy is a clamped Gaussian SoC times
    capacity. Departures are clamped to the final step of the year.
    """
    rng = np.random.default_rng(seed)
    if config.weekly_arrivals == 0:
        return []

    intensity = config.weekly_arrivals * config.arrival_profile
    last_arrival = STEPS_PER_YEAR - 2  # departure must land strictly later
    counts = rng.poisson(
        np.tile(intensity, (last_arrival + 1) // WEEK_BINS + 1)[: last_arrival + 1]
    )
    steps = np.repeat(np.nonzero(counts)[0], counts[counts > 0])

    events = []
    for ev_id, arrival in enumerate(steps, start=1):
        hours = rng.normal(config.mean_park, config.std_park)
        while not 0.0 < hours <= 24.0:
            hours = rng.normal(config.mean_park, config.std_park)
        duration = max(1, round(hours / DT_HOURS))
        soc = min(max(rng.normal(config.mean_soc, config.std_soc), 0.0), 1.0)
        events.append(
            ChargingEvent(
                ev_id=ev_id,
                arrival_step=int(arrival),
                departure_step=min(int(arrival) + duration, STEPS_PER_YEAR - 1),
                arrival_energy=soc * config.ev_capacity,
            )
        )
    return events


@dataclass(frozen=True)
class StationSchedule:
    """Who occupies which station at every step of the year.

    ``occupancy[t, s]`` holds the occupying EV id (0 = empty). An EV holds
    exactly one station contiguously from arrival to departure; arrivals
    that find no free station are dropped.
    """

    occupancy: np.ndarray                 # int32 [horizon, n_stations]
    events: tuple[ChargingEvent, ...]
    assignments: dict[int, int]           # ev_id -> station
    dropped: tuple[int, ...]              # ev_ids that found no free station

    @property
    def seated_events(self) -> tuple[ChargingEvent, ...]:
        return tuple(e for e in self.events if e.ev_id in self.assignments)

    def arrival_energies(self) -> np.ndarray:
        """Arrival energy indexed by ev_id (slot 0 unused)."""
        out = np.zeros(max((e.ev_id for e in self.events), default=0) + 1)
        for e in self.events:
            out[e.ev_id] = e.arrival_energy
        return out


def assign_stations(events: list[ChargingEvent], config: EventConfig) -> StationSchedule:
    """Seat each event at the lowest-index free station or drop it."""
    occupancy = np.zeros((STEPS_PER_YEAR, config.n_stations), dtype=np.int32)
    busy_until = [0] * config.n_stations
    assignments: dict[int, int] = {}
    dropped: list[int] = []
    for event in sorted(events, key=lambda e: (e.arrival_step, e.ev_id)):
        station = next(
            (s for s in range(config.n_stations) if busy_until[s] <= event.arrival_step),
            None,
        )
        if station is None:
            dropped.append(event.ev_id)
            continue
        occupancy[event.arrival_step : event.departure_step, station] = event.ev_id
        busy_until[station] = event.departure_step
        assignments[event.ev_id] = station
    return StationSchedule(
        occupancy=occupancy,
        events=tuple(events),
        assignments=assignments,
        dropped=tuple(dropped),
    )


def uncontrolled_baseline(
    schedule: StationSchedule,
    dataset: ScenarioDataset,
    config: EventConfig,
    max_power: float = 11.0,
):
    """Uncontrolled charging trace over the whole year.

    Every connected EV charges at ``max_power`` until it holds the full
    battery capacity, then idles; nothing ever discharges.
    """
    from .metrics import SimulationTrace  # local import to avoid a cycle

    horizon = schedule.occupancy.shape[0]
    n_stations = schedule.occupancy.shape[1]
    if horizon != len(dataset):
        raise ValueError("schedule and dataset cover different horizons")

    station_power = np.zeros((horizon, n_stations))
    station_energy = np.zeros((horizon, n_stations))
    ev_power = np.zeros(horizon)
    total_load = np.zeros(horizon)
    step_cost = np.zeros(horizon)
    departures = kernel.uncontrolled_rollout(
        schedule.occupancy,
        schedule.arrival_energies(),
        dataset.house_rw_load,
        dataset.price,
        config.ev_capacity,
        max_power,
        DT_HOURS,
        station_power,
        station_energy,
        ev_power,
        total_load,
        step_cost,
    )
    return SimulationTrace(
        household=dataset.household_power.copy(),
        renewable=dataset.renewable_power.copy(),
        ev_power=ev_power,
        total_load=total_load,
        price=dataset.price.copy(),
        step_cost=step_cost,
        station_power=station_power,
        station_energy=station_energy,
        reward=np.zeros(horizon),
        departures=tuple(departures),
        label="uncontrolled",
        seed=None,
        cumulative_reward=0.0,
    )


def events_to_csv(events: list[ChargingEvent], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ev_id", "arrival_step", "departure_step", "arrival_energy_kwh"])
        for e in events:
            writer.writerow([e.ev_id, e.arrival_step, e.departure_step, repr(e.arrival_energy)])
