"""Rule-based policies, the logit-masking utility, and a derivative-free
parameter search over the threshold-policy family.

Policies map (observation, action mask, step) to a per-station action and
must only ever emit mask-valid choices; the episode runner below enforces
nothing, the policies themselves are written to respect the mask.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .env import CHARGE, DISCHARGE, IDLE, Observation, VppEnv
from .errors import ConfigError

Decision = Callable[[Observation, np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class Policy:
    name: str
    decide: Decision
    params: Optional[dict] = None

    def __call__(self, obs: Observation, mask: np.ndarray, t: int) -> np.ndarray:
        return self.decide(obs, mask, t)


def _fill_forced(mask: np.ndarray) -> np.ndarray:
    """Per-station default action: Idle wherever valid, else the forced one."""
    n = mask.shape[0]
    action = np.zeros(n, dtype=np.int64)
    for s in range(n):
        if not mask[s, IDLE]:
            action[s] = int(np.flatnonzero(mask[s])[0])
    return action


def uncontrolled_policy() -> Policy:
    """Charge every occupied station flat out, idle once full."""

    def decide(obs: Observation, mask: np.ndarray, t: int) -> np.ndarray:
        action = _fill_forced(mask)
        for s in range(mask.shape[0]):
            if obs.available_energies[s] > 0 and mask[s, CHARGE]:
                action[s] = CHARGE
        return action

    return Policy(name="uncontrolled", decide=decide)


def random_valid_policy(seed: int) -> Policy:
    """Uniform choice among the mask-valid actions of each station."""
    rng = np.random.default_rng(seed)

    def decide(obs: Observation, mask: np.ndarray, t: int) -> np.ndarray:
        action = np.zeros(mask.shape[0], dtype=np.int64)
        for s in range(mask.shape[0]):
            choices = np.flatnonzero(mask[s])
            action[s] = int(choices[rng.integers(len(choices))])
        return action

    return Policy(name="random_valid", decide=decide, params={"seed": seed})


@dataclass(frozen=True)
class ThresholdPolicyParams:
    """Knobs of the zero-load-follower family.

    Only EVs above ``discharge_reserve`` are tapped for household support,
    opportunistic charging stops at ``charge_target``, and nothing moves
    while the inferred net load sits inside ``surplus_deadband``.
    """

    discharge_reserve: float = 30.0    # kWh
    charge_target: float = 95.0        # kWh
    surplus_deadband: float = 0.1      # kW
    prefer_fullest_discharge: bool = True

    def __post_init__(self):
        if not self.discharge_reserve <= self.charge_target:
            raise ConfigError("discharge_reserve must not exceed charge_target")
        if self.surplus_deadband < 0:
            raise ConfigError("surplus_deadband must be >= 0")


def greedy_balancer(params: ThresholdPolicyParams | None = None) -> Policy:
    """One compensating station per step, aimed at zero net load.

    The household/renewable residual is inferred from the last observation
    (total load minus EV power); a positive residual discharges the fullest
    eligible EV, a negative one charges the emptiest one below target.
    """
    p = params or ThresholdPolicyParams()

    def decide(obs: Observation, mask: np.ndarray, t: int) -> np.ndarray:
        action = _fill_forced(mask)
        residual = obs.total_load - obs.ev_power
        energies = obs.available_energies
        if residual > p.surplus_deadband:
            candidates = [
                s
                for s in range(mask.shape[0])
                if mask[s, DISCHARGE] and energies[s] > p.discharge_reserve
            ]
            if candidates:
                key = max if p.prefer_fullest_discharge else min
                action[key(candidates, key=lambda s: energies[s])] = DISCHARGE
        elif residual < -p.surplus_deadband:
            candidates = [
                s
                for s in range(mask.shape[0])
                if mask[s, CHARGE] and 0 < energies[s] < p.charge_target
            ]
            if candidates:
                action[min(candidates, key=lambda s: energies[s])] = CHARGE
        return action

    return Policy(
        name="greedy_balancer",
        decide=decide,
        params={
            "discharge_reserve": p.discharge_reserve,
            "charge_target": p.charge_target,
            "surplus_deadband": p.surplus_deadband,
        },
    )


POLICY_BUILDERS = {
    "uncontrolled": lambda seed: uncontrolled_policy(),
    "random": lambda seed: random_valid_policy(seed),
    "greedy": lambda seed: greedy_balancer(),
}


def make_policy(name: str, seed: int = 0, params: ThresholdPolicyParams | None = None) -> Policy:
    if name == "greedy" and params is not None:
        return greedy_balancer(params)
    try:
        return POLICY_BUILDERS[name](seed)
    except KeyError:
        raise ConfigError(f"unknown policy {name!r} (choose from {sorted(POLICY_BUILDERS)})")


def run_episode(env: VppEnv, policy: Policy, seed: int):
    """Roll one full episode; returns the finished trace."""
    obs = env.reset(seed)
    done = False
    t = 0
    while not done:
        action = policy(obs, env.action_mask(), t)
        result = env.step(action)
        obs = result.observation
        done = result.done
        t += 1
    return env.trace()


MASK_LOGIT = -1e9


def mask_logits(logits, mask) -> np.ndarray:
    """Masked softmax: invalid entries get a huge negative logit before the
    normalised exponential, pushing their probability to numerical zero."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != mask.shape:
        raise ValueError("logits and mask must have the same shape")
    if not mask.any():
        raise ValueError("at least one action must stay valid")
    masked = np.where(mask, logits, MASK_LOGIT)
    shifted = masked - masked.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


@dataclass(frozen=True)
class SearchResult:
    best_params: ThresholdPolicyParams
    best_score: float
    history: list  # (generation, best, mean, std) per generation


def cross_entropy_search(
    env_factory: Callable[[], VppEnv],
    bounds: dict[str, tuple[float, float]] | None = None,
    generations: int = 8,
    population: int = 12,
    elite_fraction: float = 0.25,
    seed: int = 0,
    episode_seed: int = 0,
) -> SearchResult:
    """Gaussian cross-entropy search over the threshold-policy family.

    Every candidate is scored by the cumulative reward of one seeded
    episode; elites refit a diagonal Gaussian each generation. Best-so-far
    never decreases, and the whole run is deterministic per seed.
    """
    if population < 4:
        raise ConfigError("population must be at least 4")
    if not 0.0 < elite_fraction <= 0.5:
        raise ConfigError("elite_fraction must be in (0, 0.5]")
    bounds = bounds or {
        "discharge_reserve": (20.0, 80.0),
        "charge_target": (40.0, 99.0),
        "surplus_deadband": (0.0, 2.0),
    }
    names = sorted(bounds)
    lo = np.array([bounds[k][0] for k in names])
    hi = np.array([bounds[k][1] for k in names])
    if np.any(hi <= lo):
        raise ConfigError("each bound must satisfy low < high")

    rng = np.random.default_rng(seed)
    mean = 0.5 * (lo + hi)
    std = 0.5 * (hi - lo)
    n_elite = max(1, int(round(elite_fraction * population)))

    def to_params(vector: np.ndarray) -> ThresholdPolicyParams:
        kwargs = {k: float(v) for k, v in zip(names, vector)}
        if "discharge_reserve" in kwargs and "charge_target" in kwargs:
            kwargs["discharge_reserve"] = min(
                kwargs["discharge_reserve"], kwargs["charge_target"]
            )
        return ThresholdPolicyParams(**kwargs)

    best_score = -np.inf
    best_params = to_params(mean)
    history = []
    for generation in range(generations):
        samples = rng.normal(mean, std, size=(population, len(names)))
        samples = np.clip(samples, lo, hi)
        scores = np.empty(population)
        for i in range(population):
            env = env_factory()
            trace = run_episode(env, greedy_balancer(to_params(samples[i])), episode_seed)
            scores[i] = trace.cumulative_reward
        order = np.argsort(scores)[::-1]
        if scores[order[0]] > best_score:
            best_score = float(scores[order[0]])
            best_params = to_params(samples[order[0]])
        elites = samples[order[:n_elite]]
        mean = elites.mean(axis=0)
        std = elites.std(axis=0) + 1e-3
        history.append(
            (generation, best_score, float(scores.mean()), float(scores.std()))
        )
    return SearchResult(best_params=best_params, best_score=best_score, history=history)
