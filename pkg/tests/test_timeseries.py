import hashlib
import math

import numpy as np
import pandas as pd
import pytest

from vppsim import timeseries as ts
from vppsim.errors import ConfigError, LengthError, OrderingError, SchemaError

from conftest import constant_scenario


def write_csv(path, index, household, solar, wind, price, extra=None):
    frame = pd.DataFrame(
        {
            "household_power": household,
            "solar_power": solar,
            "wind_power": wind,
            "EUR/kWh": price,
        },
        index=pd.Index(index, name="time"),
    )
    if extra is not None:
        frame["note"] = extra
    frame.to_csv(path, date_format="%Y-%m-%d %H:%M:%S")
    return path


class TestLoadScenario:
    def test_quarter_hour_year_loads_unchanged(self, tmp_path):
        index = pd.date_range("2019-01-01", periods=ts.STEPS_PER_YEAR, freq="15min")
        rng = np.random.default_rng(3)
        household = rng.uniform(0.5, 4.0, ts.STEPS_PER_YEAR)
        path = write_csv(tmp_path / "year.csv", index, household, 1.0, 2.0, 0.05)
        ds = ts.load_scenario(path)
        assert len(ds) == ts.STEPS_PER_YEAR
        np.testing.assert_allclose(ds.household_power, household, rtol=0, atol=0)
        np.testing.assert_array_equal(ds.renewable_power, ds.solar_power + ds.wind_power)

    def test_three_minute_data_resampled_by_mean(self, tmp_path):
        # 3-minute readings: 5 samples per 15-minute bin, plus the boundary row
        n = 365 * 24 * 20 + 1
        index = pd.date_range("2019-01-01", periods=n, freq="3min")
        rng = np.random.default_rng(4)
        household = rng.uniform(0.0, 5.0, n)
        path = write_csv(tmp_path / "fine.csv", index, household, 0.0, 0.0, 0.05)
        ds = ts.load_scenario(path)
        assert len(ds) == ts.STEPS_PER_YEAR
        # energy preservation oracle: sum(original * 3min) == sum(resampled * 15min)
        original_energy = household[:-1].sum() * (3 / 60)
        resampled_energy = ds.household_power[:-1].sum() * 0.25
        assert math.isclose(original_energy, resampled_energy, rel_tol=1e-6)

    def test_leap_year_rows_dropped(self, tmp_path):
        # 366*96 + 1 = 35137 rows; removing Feb 29 leaves 35041
        n = 366 * 96 + 1
        assert n - 96 == ts.STEPS_PER_YEAR
        index = pd.date_range("2020-01-01", periods=n, freq="15min")
        path = write_csv(tmp_path / "leap.csv", index, 1.0, 0.0, 0.0, 0.05)
        ds = ts.load_scenario(path)
        assert len(ds) == ts.STEPS_PER_YEAR
        assert not ((ds.index.month == 2) & (ds.index.day == 29)).any()

    def test_hourly_price_forward_filled(self, tmp_path):
        n = 365 * 24 + 1
        index = pd.date_range("2019-01-01", periods=n, freq="1h")
        price = np.arange(n, dtype=float)
        path = write_csv(tmp_path / "hourly.csv", index, 1.0, 0.0, 0.0, price)
        ds = ts.load_scenario(path)
        # each hourly price value repeats for its four quarter hours
        np.testing.assert_array_equal(ds.price[:8], [0, 0, 0, 0, 1, 1, 1, 1])

    def test_gaps_forward_filled(self, tmp_path):
        index = pd.date_range("2019-01-01", periods=ts.STEPS_PER_YEAR, freq="15min")
        household = np.ones(ts.STEPS_PER_YEAR)
        household[100:110] = np.nan
        path = write_csv(tmp_path / "gaps.csv", index, household, 0.0, 0.0, 0.05)
        ds = ts.load_scenario(path)
        assert not np.isnan(ds.household_power).any()

    def test_extra_columns_ignored(self, tmp_path):
        index = pd.date_range("2019-01-01", periods=ts.STEPS_PER_YEAR, freq="15min")
        path = write_csv(tmp_path / "extra.csv", index, 1.0, 0.0, 0.0, 0.05, extra="x")
        assert len(ts.load_scenario(path)) == ts.STEPS_PER_YEAR

    def test_missing_column_is_schema_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,household_power\n2019-01-01 00:00:00,1.0\n")
        with pytest.raises(SchemaError):
            ts.load_scenario(path)

    def test_wrong_length_reports_actual_count(self, tmp_path):
        index = pd.date_range("2019-01-01", periods=500, freq="15min")
        path = write_csv(tmp_path / "short.csv", index, 1.0, 0.0, 0.0, 0.05)
        with pytest.raises(LengthError, match="500"):
            ts.load_scenario(path)

    def test_non_monotone_timestamps_rejected(self, tmp_path):
        path = tmp_path / "order.csv"
        path.write_text(
            "time,household_power,solar_power,wind_power,EUR/kWh\n"
            "2019-01-01 00:15:00,1,0,0,0.05\n"
            "2019-01-01 00:00:00,1,0,0,0.05\n"
        )
        with pytest.raises(OrderingError):
            ts.load_scenario(path)

    def test_csv_round_trip(self, tmp_path, dataset):
        path = tmp_path / "round.csv"
        dataset.to_csv(path)
        again = ts.load_scenario(path)
        np.testing.assert_array_equal(again.household_power, dataset.household_power)
        np.testing.assert_array_equal(again.price, dataset.price)
        header = path.read_text().splitlines()[0]
        assert header == (
            "time,household_power,solar_power,wind_power,EUR/kWh,"
            "renewable_power,House&RW_load"
        )


class TestSynthesize:
    def test_deterministic_per_seed(self):
        a = ts.synthesize_scenario(11)
        b = ts.synthesize_scenario(11)
        np.testing.assert_array_equal(a.household_power, b.household_power)
        np.testing.assert_array_equal(a.solar_power, b.solar_power)
        np.testing.assert_array_equal(a.wind_power, b.wind_power)
        np.testing.assert_array_equal(a.price, b.price)

    def test_different_seeds_differ(self):
        a = ts.synthesize_scenario(1)
        b = ts.synthesize_scenario(2)
        assert not np.array_equal(a.solar_power, b.solar_power)

    def test_solar_zero_at_midnight(self, dataset):
        midnight = (dataset.index.hour == 0) & (dataset.index.minute == 0)
        assert np.all(dataset.solar_power[np.asarray(midnight)] == 0.0)

    def test_capacity_caps(self, dataset):
        assert dataset.solar_power.max() <= 16.0
        assert dataset.wind_power.max() <= 12.0

    def test_non_negative_series(self, dataset):
        assert dataset.household_power.min() >= 0.0
        assert dataset.solar_power.min() >= 0.0
        assert dataset.wind_power.min() >= 0.0

    def test_invariants_of_derived_columns(self, dataset):
        np.testing.assert_array_equal(
            dataset.renewable_power, dataset.solar_power + dataset.wind_power
        )
        # defining direction is bit-exact; the reconstruction direction can
        # only be exact up to one rounding of the subtraction
        np.testing.assert_array_equal(
            dataset.house_rw_load, dataset.household_power - dataset.renewable_power
        )
        np.testing.assert_allclose(
            dataset.house_rw_load + dataset.renewable_power,
            dataset.household_power,
            rtol=4e-15,
            atol=1e-15,
        )

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            ts.synthesize_scenario(0, ts.SynthesisConfig(pv_peak_kw=-1.0))


def checksum(dataset) -> str:
    digest = hashlib.sha256()
    for name in ("household_power", "solar_power", "wind_power", "price"):
        digest.update(getattr(dataset, name).tobytes())
    return digest.hexdigest()


class TestEpisodeNoise:
    def test_zero_sigma_is_identity(self, dataset):
        noisy = ts.apply_episode_noise(dataset, ts.NoiseSpec(sigma_fraction=0.0), 5)
        np.testing.assert_array_equal(noisy.solar_power, dataset.solar_power)
        np.testing.assert_array_equal(noisy.price, dataset.price)

    def test_input_never_mutated(self, dataset):
        before = checksum(dataset)
        ts.apply_episode_noise(dataset, ts.NoiseSpec(), 6)
        assert checksum(dataset) == before

    def test_household_untouched(self, dataset):
        noisy = ts.apply_episode_noise(dataset, ts.NoiseSpec(), 7)
        np.testing.assert_array_equal(noisy.household_power, dataset.household_power)

    def test_sigma_is_fraction_of_series_max(self):
        # constant 12 kW wind, sigma_fraction 0.10 -> per-sample sigma 1.2 kW
        base = constant_scenario(household=1.0, wind=12.0, price=0.05)
        noisy = ts.apply_episode_noise(
            base, ts.NoiseSpec(sigma_fraction=0.10, noise_price=False), 8
        )
        delta = noisy.wind_power - base.wind_power
        kept = delta[noisy.wind_power > 0]  # clamping skews clipped samples
        assert np.std(kept) == pytest.approx(1.2, rel=0.05)

    def test_noise_mean_within_clt_bound(self, dataset):
        # 4 sigma / sqrt(N) bound on the sample mean of (noisy - clean)
        noisy = ts.apply_episode_noise(
            dataset, ts.NoiseSpec(noise_renewables=False), 9
        )
        sigma = 0.10 * dataset.price.max()
        bound = 4.0 * sigma / math.sqrt(len(dataset))
        assert abs(float(np.mean(noisy.price - dataset.price))) < bound

    def test_generation_clamped_at_zero(self, dataset):
        noisy = ts.apply_episode_noise(dataset, ts.NoiseSpec(sigma_fraction=0.5), 10)
        assert noisy.solar_power.min() >= 0.0
        assert noisy.wind_power.min() >= 0.0

    def test_derived_columns_recomputed(self, dataset):
        noisy = ts.apply_episode_noise(dataset, ts.NoiseSpec(), 11)
        np.testing.assert_array_equal(
            noisy.renewable_power, noisy.solar_power + noisy.wind_power
        )
        np.testing.assert_array_equal(
            noisy.house_rw_load, noisy.household_power - noisy.renewable_power
        )


class TestDatasetGoal:
    def sum_oracle(self, dataset):
        # independent straightforward re-summation
        supply = sum(float(x) for x in dataset.renewable_power) * 0.25
        demand = sum(float(x) for x in dataset.household_power) * 0.25
        return supply, demand

    def test_matches_summation_oracle(self, dataset):
        goal = ts.dataset_goal(dataset, event_count=1000)
        supply, demand = self.sum_oracle(dataset)
        assert goal.total_supply_energy == pytest.approx(supply, rel=1e-12)
        assert goal.total_demand_energy == pytest.approx(demand, rel=1e-12)
        expected = 50.0 + (supply - demand) / 1000
        assert goal.max_avg_departure_energy == pytest.approx(
            min(expected, 100.0), rel=1e-12
        )

    def test_zero_surplus_gives_mean_arrival_energy(self):
        ds = constant_scenario(household=2.0, wind=2.0, price=0.05)
        goal = ts.dataset_goal(ds, event_count=500, mean_arrival_soc=0.5)
        assert goal.surplus_energy == pytest.approx(0.0, abs=1e-9)
        assert goal.max_avg_departure_energy == pytest.approx(50.0)

    def test_known_surplus_case(self):
        # surplus of exactly 1043 kWh split across 1043 events -> +1 kWh
        surplus_kw = 1043.0 / (0.25 * ts.STEPS_PER_YEAR)
        ds = constant_scenario(household=1.0, wind=1.0 + surplus_kw, price=0.05)
        goal = ts.dataset_goal(ds, event_count=1043, mean_arrival_soc=0.5)
        assert goal.max_avg_departure_energy == pytest.approx(51.0, abs=1e-9)

    def test_clamped_at_capacity(self):
        ds = constant_scenario(household=0.0, wind=12.0, price=0.05)
        goal = ts.dataset_goal(ds, event_count=10)
        assert goal.max_avg_departure_energy == 100.0

    def test_monotone_in_event_count(self, dataset):
        goals = [
            ts.dataset_goal(dataset, event_count=n).max_avg_departure_energy
            for n in (100, 500, 1000, 2000, 5000)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(goals, goals[1:]))

    def test_bad_event_count_rejected(self, dataset):
        with pytest.raises(ValueError):
            ts.dataset_goal(dataset, event_count=0)
