"""Aggregate metrics over a simulation trace.

The trace is the flat per-step record every run produces; everything else
(key parameters, self-consumption/autarky, energy-flow decomposition, load
histograms) is derived from it after the fact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .timeseries import DT_HOURS


@dataclass(frozen=True)
class SimulationTrace:
    """Per-step record of one simulated year plus departure bookkeeping.

    Sign conventions: ``ev_power`` > 0 while charging, ``total_load`` > 0
    when the microgrid imports from the public grid. ``step_cost`` is the
    signed per-step cost (load * dt * price), negative prices included.
    """

    household: np.ndarray          # kW
    renewable: np.ndarray          # kW (positive = generation)
    ev_power: np.ndarray           # kW, signed
    total_load: np.ndarray         # kW, signed
    price: np.ndarray              # EUR/kWh
    step_cost: np.ndarray          # EUR, signed
    station_power: np.ndarray      # kW [horizon, n_stations]
    station_energy: np.ndarray     # kWh [horizon, n_stations]
    reward: np.ndarray             # per-step reward (0 for uncontrolled runs)
    departures: tuple              # (step, ev_id, energy_kwh)
    label: str = "run"
    seed: Optional[int] = None
    cumulative_reward: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.total_load)
        for name in ("household", "renewable", "ev_power", "price", "step_cost", "reward"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"trace column {name} has mismatched length")
        if self.station_power.shape != self.station_energy.shape or len(self.station_power) != n:
            raise ValueError("per-station arrays have mismatched shape")

    def __len__(self) -> int:
        return len(self.total_load)

    @property
    def departure_energies(self) -> np.ndarray:
        return np.array([e for _, _, e in self.departures], dtype=np.float64)

    def to_frame(self):
        import pandas as pd

        n_stations = self.station_power.shape[1]
        data = {
            "household_kw": self.household,
            "renewable_kw": self.renewable,
            "ev_kw": self.ev_power,
            "total_load_kw": self.total_load,
            "price_eur_per_kwh": self.price,
            "cost_eur": self.step_cost,
            "reward": self.reward,
        }
        for s in range(n_stations):
            data[f"station{s}_power_kw"] = self.station_power[:, s]
            data[f"station{s}_energy_kwh"] = self.station_energy[:, s]
        frame = pd.DataFrame(data)
        frame.index.name = "step"
        return frame

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path)


@dataclass(frozen=True)
class KeyParameters:
    """The headline numbers a run is judged by."""

    grid_energy_used: float        # kWh imported
    re2v_unused: float             # kWh exported (renewable left unused)
    grid_cost: float               # EUR, import at non-negative prices only
    avg_departure_energy: float    # kWh
    cumulative_reward: float
    charging_event_count: int


def key_parameters(trace: SimulationTrace) -> KeyParameters:
    """Grid import/export/cost plus departure statistics for a trace."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    load = trace.total_load
    imported = np.maximum(load, 0.0)
    exported = np.maximum(-load, 0.0)
    # Import cost only, and only when the price is actually positive:
    # negative-price imports are not rewarded as negative cost.
    cost = imported * DT_HOURS * np.maximum(trace.price, 0.0)
    energies = trace.departure_energies
    return KeyParameters(
        grid_energy_used=float(imported.sum() * DT_HOURS),
        re2v_unused=float(exported.sum() * DT_HOURS),
        grid_cost=float(cost.sum()),
        avg_departure_energy=float(energies.mean()) if len(energies) else 0.0,
        cumulative_reward=trace.cumulative_reward,
        charging_event_count=len(energies),
    )


@dataclass(frozen=True)
class FlowDecomposition:
    """Energy (kWh) attributed to each supply->sink direction."""

    re2house: float
    re2ev: float
    ev2house: float
    ev2ev: float
    re2grid: float
    grid2house: float
    grid2ev: float
    ev2grid: float

    def source_totals(self) -> dict[str, float]:
        return {
            "renewable": self.re2house + self.re2ev + self.re2grid,
            "ev_discharge": self.ev2house + self.ev2ev + self.ev2grid,
            "grid_import": self.grid2house + self.grid2ev,
        }

    def sink_totals(self) -> dict[str, float]:
        return {
            "household": self.re2house + self.ev2house + self.grid2house,
            "ev_charge": self.re2ev + self.ev2ev + self.grid2ev,
            "grid_export": self.re2grid + self.ev2grid,
        }


def flow_decomposition(trace: SimulationTrace) -> FlowDecomposition:
    """Match supply to demand per step with a fixed merit order.

    Renewables serve households first, then charging EVs; discharging EVs
    serve households, then other EVs; leftover renewable goes to the grid;
    the grid covers what remains; EV discharge not absorbed locally is
    exported last.
    """
    renewable = trace.renewable
    household = trace.household
    ev_charge = np.maximum(trace.station_power, 0.0).sum(axis=1)
    ev_discharge = np.maximum(-trace.station_power, 0.0).sum(axis=1)

    re2house = np.minimum(renewable, household)
    re2ev = np.minimum(renewable - re2house, ev_charge)
    ev2house = np.minimum(ev_discharge, household - re2house)
    ev2ev = np.minimum(ev_discharge - ev2house, ev_charge - re2ev)
    re2grid = renewable - re2house - re2ev
    grid2house = household - re2house - ev2house
    grid2ev = ev_charge - re2ev - ev2ev
    ev2grid = ev_discharge - ev2house - ev2ev

    def total(x: np.ndarray) -> float:
        return float(x.sum() * DT_HOURS)

    return FlowDecomposition(
        re2house=total(re2house),
        re2ev=total(re2ev),
        ev2house=total(ev2house),
        ev2ev=total(ev2ev),
        re2grid=total(re2grid),
        grid2house=total(grid2house),
        grid2ev=total(grid2ev),
        ev2grid=total(ev2grid),
    )


def self_consumption_autarky(trace: SimulationTrace):
    """(self-consumption, autarky) rates in [0, 1], or None when undefined.

    Self-consumption: share of renewable production used locally (directly
    or stored in EVs). Autarky: share of local demand (households plus EV
    charging) served without grid import, counting EV-buffered renewable
    energy as renewable-origin.
    """
    flows = flow_decomposition(trace)
    production = float(trace.renewable.sum() * DT_HOURS)
    demand = float(
        (trace.household + np.maximum(trace.station_power, 0.0).sum(axis=1)).sum()
        * DT_HOURS
    )
    self_consumption = None
    autarky = None
    if production > 0:
        self_consumption = 1.0 - flows.re2grid / production
    if demand > 0:
        autarky = 1.0 - (flows.grid2house + flows.grid2ev) / demand
    return self_consumption, autarky


@dataclass(frozen=True)
class LoadHistogram:
    """Distribution of the net load plus counts in the balanced bands."""

    bin_edges: np.ndarray
    counts: np.ndarray
    balanced_band_counts: dict  # band half-width kW -> step count

    def balanced_fraction(self, band: float = 0.1) -> float:
        return self.balanced_band_counts[band] / int(self.counts.sum())


BALANCED_BANDS_KW = (0.05, 0.1)


def load_histogram(trace: SimulationTrace, edges=None) -> LoadHistogram:
    """Histogram of net load; outliers are folded into the end bins so the
    counts always sum to the trace length."""
    load = trace.total_load
    if edges is None:
        edges = np.arange(-20.0, 20.0 + 0.25, 0.5)
    edges = np.asarray(edges, dtype=np.float64)
    clipped = np.clip(load, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    bands = {
        band: int(np.count_nonzero(np.abs(load) <= band))
        for band in BALANCED_BANDS_KW
    }
    return LoadHistogram(bin_edges=edges, counts=counts, balanced_band_counts=bands)


def report(params: KeyParameters, trace: SimulationTrace) -> dict:
    """Flat key/value report covering the key parameters and rates."""
    sc, autarky = self_consumption_autarky(trace)
    hist = load_histogram(trace)
    flows = flow_decomposition(trace)
    out = {
        "label": trace.label,
        "grid_energy_used_kwh": params.grid_energy_used,
        "re2v_unused_kwh": params.re2v_unused,
        "grid_cost_eur": params.grid_cost,
        "avg_departure_energy_kwh": params.avg_departure_energy,
        "cumulative_reward": params.cumulative_reward,
        "charging_event_count": params.charging_event_count,
        "self_consumption_rate": sc,
        "autarky_rate": autarky,
        "total_cost_signed_eur": float(trace.step_cost.sum()),
        "supply_demand_energy_kwh": float(trace.total_load.sum() * DT_HOURS),
    }
    for band in BALANCED_BANDS_KW:
        out[f"balanced_steps_within_{band}_kw"] = hist.balanced_band_counts[band]
    for name, value in vars(flows).items():
        out[f"flow_{name}_kwh"] = value
    return out
