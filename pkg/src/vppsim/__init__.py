"""vppsim: a deterministic residential-microgrid control simulator.

PV + wind generation, four households and four bidirectional EV charging
stations form a small virtual power plant; controllers (or external RL
agents over the bridge protocol) pick per-station charge/discharge actions
while the adaptive power evaluation chases a zero net load.
"""
from .env import EnvConfig, Observation, StepResult, VppEnv, action_index
from .events import ChargingEvent, EventConfig, StationSchedule
from .kernel import BACKEND as KERNEL_BACKEND
from .metrics import FlowDecomposition, KeyParameters, SimulationTrace
from .timeseries import (
    DatasetGoal,
    NoiseSpec,
    ScenarioDataset,
    SynthesisConfig,
    apply_episode_noise,
    dataset_goal,
    load_scenario,
    synthesize_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "ChargingEvent",
    "DatasetGoal",
    "EnvConfig",
    "EventConfig",
    "FlowDecomposition",
    "KERNEL_BACKEND",
    "KeyParameters",
    "NoiseSpec",
    "Observation",
    "ScenarioDataset",
    "SimulationTrace",
    "StationSchedule",
    "StepResult",
    "SynthesisConfig",
    "VppEnv",
    "action_index",
    "apply_episode_noise",
    "dataset_goal",
    "load_scenario",
    "synthesize_scenario",
    "__version__",
]
