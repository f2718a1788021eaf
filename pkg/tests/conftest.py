import numpy as np
import pytest

from vppsim import EventConfig, VppEnv, synthesize_scenario


@pytest.fixture(scope="session")
def dataset():
    return synthesize_scenario(0)


@pytest.fixture(scope="session")
def small_dataset():
    """Full-length dataset paired with a short-horizon env for fast episodes."""
    return synthesize_scenario(7)


def make_env(dataset, horizon=None, weekly_arrivals=20, **env_kwargs):
    from vppsim import EnvConfig

    cfg = EnvConfig(horizon=horizon, **env_kwargs) if horizon else EnvConfig(**env_kwargs)
    return VppEnv(dataset, EventConfig(weekly_arrivals=weekly_arrivals), cfg)


@pytest.fixture
def env(dataset):
    return make_env(dataset)


@pytest.fixture
def short_env(small_dataset):
    return make_env(small_dataset, horizon=3000)


def constant_scenario(household=1.0, solar=0.0, wind=0.0, price=0.05):
    """One synthetic year of constant series, for hand-computable cases."""
    import pandas as pd

    from vppsim import ScenarioDataset
    from vppsim.timeseries import STEPS_PER_YEAR

    index = pd.date_range("2019-01-01", periods=STEPS_PER_YEAR, freq="15min")
    full = np.full(STEPS_PER_YEAR, 1.0)
    return ScenarioDataset(
        index=index,
        household_power=household * full,
        solar_power=solar * full,
        wind_power=wind * full,
        price=price * full,
    )
