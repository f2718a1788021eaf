"""Scenario datasets: loading, synthesis, per-episode noise, dataset goals.

A scenario is one simulated year at 15-minute resolution: household demand,
solar and wind generation, day-ahead energy price, plus the derived columns
(total renewable power and the household-minus-renewable net load, supply
counted negative).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, LengthError, OrderingError, SchemaError

STEP_MINUTES = 15
DT_HOURS = 0.25
# 365 days of quarter hours plus the first step of the next year.
STEPS_PER_YEAR = 365 * 96 + 1

# CSV schema (exact header names). Extra columns are ignored on input.
TIME_COLUMN = "time"
PRICE_COLUMN = "EUR/kWh"
INPUT_COLUMNS = ("household_power", "solar_power", "wind_power", PRICE_COLUMN)
DERIVED_COLUMNS = ("renewable_power", "House&RW_load")


@dataclass(frozen=True)
class ScenarioDataset:
    """One year of aligned 15-minute series (power in kW, price in EUR/kWh)."""

    index: pd.DatetimeIndex
    household_power: np.ndarray
    solar_power: np.ndarray
    wind_power: np.ndarray
    price: np.ndarray
    renewable_power: np.ndarray = field(init=False)
    house_rw_load: np.ndarray = field(init=False)

    def __post_init__(self):
        n = len(self.index)
        for name in ("household_power", "solar_power", "wind_power", "price"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (n,):
                raise LengthError(f"{name}: expected {n} values, got {arr.shape}")
            if name != "price" and np.any(arr < 0):
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, arr)
        renewable = self.solar_power + self.wind_power
        object.__setattr__(self, "renewable_power", renewable)
        object.__setattr__(self, "house_rw_load", self.household_power - renewable)
        for name in (
            "household_power",
            "solar_power",
            "wind_power",
            "price",
            "renewable_power",
            "house_rw_load",
        ):
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return len(self.index)

    def to_frame(self) -> pd.DataFrame:
        """Full table in the input schema plus derived columns."""
        return pd.DataFrame(
            {
                "household_power": self.household_power,
                "solar_power": self.solar_power,
                "wind_power": self.wind_power,
                PRICE_COLUMN: self.price,
                "renewable_power": self.renewable_power,
                "House&RW_load": self.house_rw_load,
            },
            index=pd.Index(self.index, name=TIME_COLUMN),
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, date_format="%Y-%m-%d %H:%M:%S")


def _drop_leap_day(frame: pd.DataFrame) -> pd.DataFrame:
    feb29 = (frame.index.month == 2) & (frame.index.day == 29)
    return frame.loc[~feb29]


def load_scenario(path, drop_leap_day: bool = True) -> ScenarioDataset:
    """Read a scenario CSV, fill gaps, resample to 15 minutes.

    Power columns are resampled by mean (interval-average quantities), the
    price column by last observation (day-ahead prices are step functions).
    Feb-29 rows are removed when ``drop_leap_day`` is set so every scenario
    ends up with exactly one non-leap year of steps.
    """
    # round_trip parsing: the default fast parser is off by 1 ulp on some
    # values, which breaks byte-identical replays of exported scenarios.
    raw = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in (TIME_COLUMN,) + INPUT_COLUMNS if c not in raw.columns]
    if missing:
        raise SchemaError(f"{path}: missing mandatory column(s) {missing}")

    raw[TIME_COLUMN] = pd.to_datetime(raw[TIME_COLUMN])
    if not raw[TIME_COLUMN].is_monotonic_increasing:
        raise OrderingError(f"{path}: timestamps are not monotone increasing")
    frame = raw.set_index(TIME_COLUMN)[list(INPUT_COLUMNS)]
    frame = frame.ffill()

    rule = f"{STEP_MINUTES}min"
    power = frame[list(INPUT_COLUMNS[:3])].resample(rule).mean()
    price = frame[PRICE_COLUMN].resample(rule).last()
    frame = pd.concat([power, price], axis=1).ffill()

    if drop_leap_day:
        frame = _drop_leap_day(frame)
    if len(frame) != STEPS_PER_YEAR:
        raise LengthError(
            f"{path}: expected {STEPS_PER_YEAR} rows after preprocessing, "
            f"got {len(frame)}"
        )
    return ScenarioDataset(
        index=pd.DatetimeIndex(frame.index),
        household_power=frame["household_power"].to_numpy(),
        solar_power=frame["solar_power"].to_numpy(),
        wind_power=frame["wind_power"].to_numpy(),
        price=frame[PRICE_COLUMN].to_numpy(),
    )


@dataclass(frozen=True)
class SynthesisConfig:
    """Capacities and scale for the synthetic scenario generator.

    Defaults mirror the reference installation: 40 x 400 W PV panels and
    8 x 1.5 kW wind turbines feeding 4 households.
    """

    pv_peak_kw: float = 16.0
    wind_peak_kw: float = 12.0
    n_households: int = 4
    household_base_kw: float = 0.35
    year: int = 2019


def synthesize_scenario(seed: int, config: SynthesisConfig | None = None) -> ScenarioDataset:
    """Deterministic desk-scale scenario standing in for measured data.

    Solar follows a seasonal clipped diurnal curve with an autocorrelated
    cloud factor, wind is bounded autocorrelated noise, households follow a
    two-peak daily profile, prices a daily curve held constant per hour.
    """
    cfg = config or SynthesisConfig()
    if cfg.pv_peak_kw <= 0 or cfg.wind_peak_kw <= 0 or cfg.n_households <= 0:
        raise ConfigError("capacities and household count must be positive")

    rng = np.random.default_rng(seed)
    index = pd.date_range(
        start=f"{cfg.year}-01-01", periods=STEPS_PER_YEAR, freq=f"{STEP_MINUTES}min"
    )
    if index[-1] != pd.Timestamp(f"{cfg.year + 1}-01-01"):
        raise LengthError(f"{cfg.year} is not usable as a 365-day scenario year")

    day = np.asarray(index.dayofyear - 1, dtype=np.float64)
    hour = np.asarray(index.hour + index.minute / 60.0, dtype=np.float64)

    def ar1(rho: float, sigma: float, n: int = STEPS_PER_YEAR) -> np.ndarray:
        eps = rng.normal(0.0, sigma, size=n)
        out = np.empty(n)
        out[0] = eps[0]
        for i in range(1, n):
            out[i] = rho * out[i - 1] + eps[i]
        return out

    # Solar: zero outside the daylight window, cosine hump inside, seasonal
    # amplitude peaking at the summer solstice, slow cloud attenuation.
    season = 0.55 - 0.45 * np.cos(2.0 * np.pi * (day - 172.0) / 365.0)
    half_window = 4.5 + 3.0 * season
    offset = np.abs(hour - 12.0)
    in_daylight = offset < half_window
    diurnal = np.where(
        in_daylight, np.cos(0.5 * np.pi * offset / half_window), 0.0
    )
    clouds = 0.35 + 0.65 / (1.0 + np.exp(-ar1(0.985, 0.12)))
    solar = cfg.pv_peak_kw * season * diurnal**1.3 * clouds
    solar = np.clip(solar, 0.0, cfg.pv_peak_kw)

    # Wind: AR(1) squashed into (0, peak); slightly stronger in winter.
    breeze = ar1(0.97, 0.25)
    winter = 1.0 + 0.25 * np.cos(2.0 * np.pi * (day - 15.0) / 365.0)
    wind = cfg.wind_peak_kw * 0.5 * (1.0 + np.tanh(0.9 * breeze * winter - 0.55))
    wind = np.clip(wind, 0.0, cfg.wind_peak_kw)

    # Households: base + morning/evening peaks, per-home jitter, smooth noise.
    morning = np.exp(-0.5 * ((hour - 7.8) / 1.3) ** 2)
    evening = np.exp(-0.5 * ((hour - 19.3) / 1.7) ** 2)
    seasonal_demand = 1.0 + 0.18 * np.cos(2.0 * np.pi * (day - 15.0) / 365.0)
    household = np.zeros(STEPS_PER_YEAR)
    for _ in range(cfg.n_households):
        scale_m = rng.uniform(0.6, 1.2)
        scale_e = rng.uniform(0.9, 1.7)
        wobble = ar1(0.9, 0.05)
        household += (
            cfg.household_base_kw
            + scale_m * morning
            + scale_e * evening
            + wobble
        )
    household = np.clip(household * seasonal_demand, 0.05, None)

    # Day-ahead price: daily double hump plus slow noise, held per hour.
    price_curve = 0.07 + 0.05 * morning + 0.06 * evening + 0.015 * ar1(0.95, 0.2)
    hourly = price_curve[::4]
    price = np.repeat(hourly, 4)[:STEPS_PER_YEAR]

    return ScenarioDataset(
        index=index,
        household_power=household,
        solar_power=solar,
        wind_power=wind,
        price=price,
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Per-episode white-noise settings.

    Noise is Gaussian with sigma equal to ``sigma_fraction`` of each target
    series' maximum, applied to the renewable generation components and the
    price series only (household demand stays clean).
    """

    sigma_fraction: float = 0.10
    noise_renewables: bool = True
    noise_price: bool = True

    def __post_init__(self):
        if self.sigma_fraction < 0:
            raise ConfigError("sigma_fraction must be >= 0")


def apply_episode_noise(
    dataset: ScenarioDataset, spec: NoiseSpec, seed: int
) -> ScenarioDataset:
    """Return a noisy copy of ``dataset``; the input is never mutated.

    Generation series are clamped at zero from below after noising since
    negative generation is unphysical; derived columns are recomputed.
    """
    rng = np.random.default_rng(seed)
    n = len(dataset)

    def noisy(series: np.ndarray, clamp: bool) -> np.ndarray:
        sigma = spec.sigma_fraction * float(series.max())
        out = series + rng.normal(0.0, 1.0, size=n) * sigma
        return np.clip(out, 0.0, None) if clamp else out

    solar = dataset.solar_power
    wind = dataset.wind_power
    price = dataset.price
    if spec.noise_renewables:
        solar = noisy(solar, clamp=True)
        wind = noisy(wind, clamp=True)
    if spec.noise_price:
        price = noisy(price, clamp=False)
    return ScenarioDataset(
        index=dataset.index,
        household_power=dataset.household_power,
        solar_power=solar,
        wind_power=wind,
        price=price,
    )


@dataclass(frozen=True)
class DatasetGoal:
    """Aggregate energy balance of a scenario and the resulting target.

    ``max_avg_departure_energy`` is the energy every EV would leave with if
    the whole renewable surplus were stored evenly across all charging
    events on top of the average arrival energy, capped at the battery
    capacity (the unclamped value can exceed what a battery can hold).
    """

    total_supply_energy: float
    total_demand_energy: float
    surplus_energy: float
    max_avg_departure_energy: float
    mean_arrival_energy: float
    event_count: int


def dataset_goal(
    dataset: ScenarioDataset,
    event_count: int,
    mean_arrival_soc: float = 0.5,
    ev_capacity: float = 100.0,
) -> DatasetGoal:
    """Energy totals plus the per-dataset departure-energy target."""
    if event_count <= 0:
        raise ValueError("event_count must be positive")
    if not 0.0 <= mean_arrival_soc <= 1.0:
        raise ValueError("mean_arrival_soc must be within [0, 1]")
    supply = float(dataset.renewable_power.sum() * DT_HOURS)
    demand = float(dataset.household_power.sum() * DT_HOURS)
    surplus = supply - demand
    mean_arrival = mean_arrival_soc * ev_capacity
    goal = mean_arrival + surplus / event_count
    goal = min(max(goal, 0.0), ev_capacity)
    return DatasetGoal(
        total_supply_energy=supply,
        total_demand_energy=demand,
        surplus_energy=surplus,
        max_avg_departure_energy=goal,
        mean_arrival_energy=mean_arrival,
        event_count=event_count,
    )
