import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vppsim import metrics
from vppsim.timeseries import DT_HOURS


def make_trace(
    household, renewable, station_power, price=None, departures=(), reward=None
):
    household = np.asarray(household, dtype=np.float64)
    n = len(household)
    renewable = np.asarray(renewable, dtype=np.float64)
    station_power = np.asarray(station_power, dtype=np.float64)
    if station_power.ndim == 1:
        station_power = station_power[:, None]
    ev_power = station_power.sum(axis=1)
    total_load = household - renewable + ev_power
    price = np.full(n, 0.05) if price is None else np.asarray(price, dtype=np.float64)
    return metrics.SimulationTrace(
        household=household,
        renewable=renewable,
        ev_power=ev_power,
        total_load=total_load,
        price=price,
        step_cost=total_load * DT_HOURS * price,
        station_power=station_power,
        station_energy=np.zeros_like(station_power),
        reward=np.zeros(n) if reward is None else np.asarray(reward),
        departures=tuple(departures),
    )


def random_trace(seed, n=500, n_stations=4):
    rng = np.random.default_rng(seed)
    household = rng.uniform(0, 6, n)
    renewable = rng.uniform(0, 10, n)
    station_power = rng.uniform(-11, 11, (n, n_stations))
    price = rng.normal(0.06, 0.04, n)
    departures = tuple(
        (int(t), i + 1, float(e))
        for i, (t, e) in enumerate(
            zip(rng.integers(0, n, 30), rng.uniform(0, 100, 30))
        )
    )
    return make_trace(household, renewable, station_power, price, departures)


class TestKeyParameters:
    def test_constant_import(self):
        # constant +1 kW over 35040 steps -> 8760 kWh imported, nothing exported
        trace = make_trace(np.ones(35040), np.zeros(35040), np.zeros(35040))
        params = metrics.key_parameters(trace)
        assert params.grid_energy_used == pytest.approx(8760.0)
        assert params.re2v_unused == 0.0

    def test_against_resummation_oracle(self):
        trace = random_trace(0)
        params = metrics.key_parameters(trace)
        # independent plain-python re-summation
        imp = exp = cost = 0.0
        for load, price in zip(trace.total_load, trace.price):
            if load > 0:
                imp += load * 0.25
                if price > 0:
                    cost += load * 0.25 * price
            else:
                exp += -load * 0.25
        assert params.grid_energy_used == pytest.approx(imp, rel=1e-12)
        assert params.re2v_unused == pytest.approx(exp, rel=1e-12)
        assert params.grid_cost == pytest.approx(cost, rel=1e-12)
        assert params.avg_departure_energy == pytest.approx(
            float(np.mean([e for _, _, e in trace.departures])), rel=1e-12
        )
        assert params.charging_event_count == len(trace.departures)

    def test_import_minus_export_is_net_energy(self):
        for seed in range(5):
            trace = random_trace(seed)
            params = metrics.key_parameters(trace)
            net = float(trace.total_load.sum() * DT_HOURS)
            assert params.grid_energy_used - params.re2v_unused == pytest.approx(
                net, abs=1e-9
            )

    def test_negative_price_import_costs_nothing(self):
        trace = make_trace(
            np.ones(8), np.zeros(8), np.zeros(8), price=np.full(8, -0.01)
        )
        assert metrics.key_parameters(trace).grid_cost == 0.0

    def test_empty_trace_rejected(self):
        trace = make_trace(np.ones(4), np.zeros(4), np.zeros(4))
        empty = metrics.SimulationTrace(
            household=np.array([]),
            renewable=np.array([]),
            ev_power=np.array([]),
            total_load=np.array([]),
            price=np.array([]),
            step_cost=np.array([]),
            station_power=np.zeros((0, 4)),
            station_energy=np.zeros((0, 4)),
            reward=np.array([]),
            departures=(),
        )
        metrics.key_parameters(trace)
        with pytest.raises(ValueError):
            metrics.key_parameters(empty)

    def test_round_trip_through_csv(self, tmp_path):
        trace = random_trace(1)
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        frame = pd.read_csv(path, float_precision="round_trip")
        reloaded = metrics.SimulationTrace(
            household=frame["household_kw"].to_numpy(),
            renewable=frame["renewable_kw"].to_numpy(),
            ev_power=frame["ev_kw"].to_numpy(),
            total_load=frame["total_load_kw"].to_numpy(),
            price=frame["price_eur_per_kwh"].to_numpy(),
            step_cost=frame["cost_eur"].to_numpy(),
            station_power=frame[[f"station{s}_power_kw" for s in range(4)]].to_numpy(),
            station_energy=frame[[f"station{s}_energy_kwh" for s in range(4)]].to_numpy(),
            reward=frame["reward"].to_numpy(),
            departures=trace.departures,
        )
        assert metrics.key_parameters(reloaded) == metrics.key_parameters(trace)


class TestFlowDecomposition:
    def test_single_source_split(self):
        # renewable 5 kW, household 3 kW, EVs idle: 3 to the house, 2 exported
        trace = make_trace([3.0], [5.0], [[0.0, 0.0, 0.0, 0.0]])
        flows = metrics.flow_decomposition(trace)
        assert flows.re2house == pytest.approx(3.0 * DT_HOURS)
        assert flows.re2grid == pytest.approx(2.0 * DT_HOURS)
        assert flows.ev2house == flows.grid2house == 0.0

    def test_single_discharge_path(self):
        trace = make_trace([4.0], [0.0], [[-4.0, 0.0, 0.0, 0.0]])
        flows = metrics.flow_decomposition(trace)
        assert flows.ev2house == pytest.approx(4.0 * DT_HOURS)
        assert flows.grid2house == 0.0

    def test_ev_to_ev_attribution(self):
        # one EV discharges 3 kW while another charges 2 kW, no renewables
        trace = make_trace([1.0], [0.0], [[-3.0, 2.0, 0.0, 0.0]])
        flows = metrics.flow_decomposition(trace)
        assert flows.ev2house == pytest.approx(1.0 * DT_HOURS)
        assert flows.ev2ev == pytest.approx(2.0 * DT_HOURS)
        assert flows.ev2grid == pytest.approx(0.0)

    def test_conservation_on_random_traces(self):
        for seed in range(10):
            trace = random_trace(seed)
            flows = metrics.flow_decomposition(trace)
            supply = float(
                (trace.renewable + np.maximum(-trace.station_power, 0).sum(axis=1)).sum()
                * DT_HOURS
            ) + metrics.key_parameters(trace).grid_energy_used
            demand = float(
                (trace.household + np.maximum(trace.station_power, 0).sum(axis=1)).sum()
                * DT_HOURS
            ) + metrics.key_parameters(trace).re2v_unused
            assert sum(flows.source_totals().values()) == pytest.approx(supply, abs=1e-6)
            assert sum(flows.sink_totals().values()) == pytest.approx(demand, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_all_flows_non_negative(self, seed):
        flows = metrics.flow_decomposition(random_trace(seed, n=64))
        for value in vars(flows).values():
            assert value >= -1e-12


class TestSelfConsumptionAutarky:
    def test_no_evs_surplus_means_full_autarky(self):
        trace = make_trace(np.full(10, 2.0), np.full(10, 5.0), np.zeros(10))
        sc, autarky = metrics.self_consumption_autarky(trace)
        assert autarky == pytest.approx(1.0)
        assert sc == pytest.approx(2.0 / 5.0)

    def test_all_exported_zero_self_consumption(self):
        trace = make_trace(np.zeros(10), np.full(10, 5.0), np.zeros(10))
        sc, autarky = metrics.self_consumption_autarky(trace)
        assert sc == pytest.approx(0.0)
        assert autarky is None  # no demand at all

    def test_zero_production_is_undefined(self):
        trace = make_trace(np.full(10, 2.0), np.zeros(10), np.zeros(10))
        sc, autarky = metrics.self_consumption_autarky(trace)
        assert sc is None
        assert autarky == pytest.approx(0.0)

    def test_identity_with_flow_decomposition(self):
        for seed in range(5):
            trace = random_trace(seed)
            flows = metrics.flow_decomposition(trace)
            sc, _ = metrics.self_consumption_autarky(trace)
            production = float(trace.renewable.sum() * DT_HOURS)
            assert sc == pytest.approx(1.0 - flows.re2grid / production, rel=1e-12)

    def test_rates_within_unit_interval(self):
        for seed in range(5):
            sc, autarky = metrics.self_consumption_autarky(random_trace(seed))
            assert 0.0 <= sc <= 1.0
            assert 0.0 <= autarky <= 1.0


class TestLoadHistogram:
    def test_all_zero_load_lands_in_balanced_band(self):
        trace = make_trace(np.zeros(35041), np.zeros(35041), np.zeros(35041))
        hist = metrics.load_histogram(trace)
        assert hist.balanced_band_counts[0.05] == 35041
        assert hist.balanced_band_counts[0.1] == 35041

    def test_alternating_loads_miss_the_band(self):
        household = np.tile([1.0, 0.0], 50)
        renewable = np.tile([0.0, 1.0], 50)
        trace = make_trace(household, renewable, np.zeros(100))
        hist = metrics.load_histogram(trace)
        assert hist.balanced_band_counts[0.05] == 0

    def test_counts_sum_to_horizon_even_with_outliers(self):
        household = np.full(200, 500.0)  # beyond the default edges
        trace = make_trace(household, np.zeros(200), np.zeros(200))
        hist = metrics.load_histogram(trace)
        assert int(hist.counts.sum()) == 200

    def test_balanced_fraction_helper(self):
        trace = make_trace(np.zeros(10), np.zeros(10), np.zeros(10))
        assert metrics.load_histogram(trace).balanced_fraction(0.1) == 1.0


class TestReport:
    def test_report_is_flat_and_json_safe(self):
        import json

        trace = random_trace(2)
        report = metrics.report(metrics.key_parameters(trace), trace)
        encoded = json.dumps(report)
        assert "grid_energy_used_kwh" in report
        assert "flow_re2grid_kwh" in report
        assert isinstance(json.loads(encoded), dict)
