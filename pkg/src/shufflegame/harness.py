"""Seeded game trials, Monte Carlo aggregation, transition probing and the DDoS scenario."""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from shufflegame.assignment import Assignment, random_initial_assignment
from shufflegame.baselines import PolicyKind, get_policy
from shufflegame.ces import ces_decide, cheapest_shuffle_costs
from shufflegame.game import (
    EMPTY_ACTION,
    ConfigError,
    GameConfig,
    init_game,
    observe,
    transit_batch,
    transit_state,
)
from shufflegame.rng import RandomSource, derive_seed
from shufflegame.assignment import shuffle_cost
from shufflegame.strategies import (
    GameHistory,
    StepRecord,
    attack_strategy,
    attacker_step_cost,
    defend_strategy,
    step_rewards,
)

log = logging.getLogger(__name__)

ATTACKER_MODES = ("strategic", "sequential-ddos")
METRICS = ("effectiveness", "effectiveness_step", "cost", "cumulative_cost",
           "defender_payoff", "attacker_payoff", "crashed_vms")


@dataclass(frozen=True)
class EtaMode:
    """How many users are online on each VM at each step.

    ``fixed``: every VM has ``value`` online users. ``sweep``: one experiment
    per value in ``lo..hi``. ``uniform``: each VM draws uniformly from
    ``lo..hi`` every step. ``trace``: ``series[t]`` is used at step ``t`` (a
    scalar for all VMs or one count per VM); the last entry repeats.

    For ``fixed`` and ``sweep`` the value is an average when
    ``spread == "binomial"``: each VM draws Binomial(m, value/m) per step.
    """

    kind: Literal["fixed", "sweep", "uniform", "trace"] = "fixed"
    value: int = 10
    lo: int = 0
    hi: int = 20
    series: tuple = ()
    spread: Literal["exact", "binomial"] = "exact"

    def sweep_values(self) -> list[int]:
        return list(range(self.lo, self.hi + 1))

    def draw(self, config: GameConfig, horizon: int, rng: RandomSource,
             value: int | None = None) -> np.ndarray:
        """Online counts of shape ``(horizon, n)``."""
        n, m = config.n, config.m
        if self.kind == "uniform":
            return rng.integers(self.lo, self.hi + 1, size=(horizon, n))
        if self.kind == "trace":
            rows = [np.broadcast_to(np.asarray(self.series[min(t, len(self.series) - 1)], dtype=int), (n,))
                    for t in range(horizon)]
            return np.array(rows)
        level = self.value if value is None else value
        if self.spread == "binomial":
            return rng.binomial(m, level / m, size=(horizon, n))
        return np.full((horizon, n), level, dtype=int)

    def validate(self, m: int) -> None:
        if self.kind not in ("fixed", "sweep", "uniform", "trace"):
            raise ConfigError("eta_mode", f"unknown mode {self.kind!r}")
        if self.spread not in ("exact", "binomial"):
            raise ConfigError("eta_spread", f"unknown spread {self.spread!r}")
        if self.kind == "fixed" and not 0 <= self.value <= m:
            raise ConfigError("eta", f"must lie in [0, {m}]")
        if self.kind in ("sweep", "uniform"):
            if self.lo > self.hi:
                raise ConfigError("eta_lo", f"lo > hi ({self.lo} > {self.hi})")
            if self.lo < 0 or self.hi > m:
                raise ConfigError("eta_hi", f"range must lie in [0, {m}]")
        if self.kind == "trace":
            if not self.series:
                raise ConfigError("eta_series", "empty trace")
            flat = np.concatenate([np.ravel(np.asarray(s)) for s in self.series])
            if flat.min() < 0 or flat.max() > m:
                raise ConfigError("eta_series", f"values must lie in [0, {m}]")


@dataclass(frozen=True)
class ExperimentSpec:
    config: GameConfig
    policy: PolicyKind = PolicyKind.CES
    trials: int = 200
    seed: int = 0
    eta: EtaMode = field(default_factory=EtaMode)
    attacker_mode: str = "strategic"
    eval_step: int = 10
    use_defend_gate: bool = False
    rrt_interval: int = 1
    workers: int = 1

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def with_policy(self, policy) -> ExperimentSpec:
        return replace(self, policy=PolicyKind(policy))

    def validate(self) -> ExperimentSpec:
        self.config.validate()
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.attacker_mode not in ATTACKER_MODES:
            raise ConfigError("attacker_mode", f"expected one of {ATTACKER_MODES}")
        if not 1 <= self.eval_step <= self.horizon:
            raise ConfigError("eval_step", f"must lie in [1, {self.horizon}]")
        if self.rrt_interval < 1:
            raise ConfigError("rrt_interval", "must be >= 1")
        self.eta.validate(self.config.m)
        return self


class SequentialDDoS:
    """Flood tool working through VMs one by one, lowest healthy id first.

    It aims at the address (segment, port) it last scanned for the target. If
    the VM has hopped since, the flood misses that step and the tool rescans.
    """

    def __init__(self, assignment: Assignment):
        self.known_segment = assignment.segments().copy()
        self.known_port = assignment.ports().copy()

    def act(self, s_t, assignment: Assignment) -> frozenset[int]:
        healthy = np.flatnonzero(np.asarray(s_t) == 0)
        if len(healthy) == 0:
            return EMPTY_ACTION
        v = int(healthy[0])
        seg, port = int(assignment.segments()[v]), int(assignment.ports()[v])
        if (seg, port) != (self.known_segment[v], self.known_port[v]):
            self.known_segment[v], self.known_port[v] = seg, port
            return EMPTY_ACTION
        return frozenset((v,))


def run_trial(spec: ExperimentSpec, trial_seed: int, eta_value: int | None = None,
              keep_assignments: bool = False) -> GameHistory:
    """Play one game over the horizon.

    Each step: the defender observes, both sides pick actions, the state
    transitions, and rewards and costs are booked. Three independent streams
    are split from ``trial_seed`` (environment, world, defender) so different
    policies see the same initial placement, online counts and world draws.
    """
    config = spec.config
    env, world, defender_rng = RandomSource(trial_seed).spawn(3)
    s, o, _, d_prev = init_game(config)
    assignment = random_initial_assignment(config, env)
    eta = spec.eta.draw(config, spec.horizon, env, eta_value)
    policy = get_policy(spec.policy, spec.rrt_interval)
    ddos = SequentialDDoS(assignment) if spec.attacker_mode == "sequential-ddos" else None
    history = GameHistory(config)
    if keep_assignments:
        history.assignments.append(assignment)

    for t in range(spec.horizon):
        if t > 0:
            o = observe(s, config, world)
        attack = ddos.act(s, assignment) if ddos else attack_strategy(s, t, config)
        if spec.policy is PolicyKind.CES and spec.use_defend_gate:
            costs = cheapest_shuffle_costs(assignment, eta[t], config, o)
            gate = defend_strategy(o, d_prev, t, config, costs, keep_all=True)
            decision = ces_decide(o, assignment, eta[t], t, config, defender_rng, candidates=gate)
        else:
            decision = policy(o, assignment, eta[t], t, config, defender_rng)
        defend = decision.defend
        s_next = transit_state(s, o, defend, attack, config, world)
        d_reward, a_reward = step_rewards(s, s_next, config)
        history.append(StepRecord(
            t=t + 1, state_before=s, observation=o, attack=attack, defend=defend,
            state_after=s_next, defender_reward=d_reward,
            defender_cost=shuffle_cost(assignment, decision.next, decision.shuffled, config.weights),
            attacker_reward=a_reward, attacker_cost=attacker_step_cost(defend, attack, config),
        ))
        assignment = decision.next
        if keep_assignments:
            history.assignments.append(assignment)
        s, d_prev = s_next, defend
    return history


def trial_metrics(history: GameHistory) -> dict[str, np.ndarray]:
    """Per-step metric arrays for one trial (payoffs are cumulative and discounted)."""
    recs = history.records
    gamma = history.config.gamma
    disc = gamma ** np.arange(len(recs))
    eff = np.array([r.defender_reward for r in recs])
    cost = np.array([r.defender_cost for r in recs])
    a_net = np.array([r.attacker_reward - r.attacker_cost for r in recs])
    return {
        "effectiveness": np.cumsum(eff),
        "effectiveness_step": eff,
        "cost": cost,
        "cumulative_cost": np.cumsum(cost),
        "defender_payoff": np.cumsum(disc * (eff - cost)),
        "attacker_payoff": np.cumsum(disc * a_net),
        "crashed_vms": np.array([float(r.state_after.sum()) for r in recs]),
    }


@dataclass
class AggregateSeries:
    """Means and (population) standard deviations across trials.

    ``index`` holds the time steps 1..T, or the η values for a sweep.
    ``samples[metric]`` keeps the per-trial values, shape ``(trials, len(index))``.
    """

    policy: str
    trials: int
    index: np.ndarray
    samples: dict[str, np.ndarray]
    index_name: str = "t"

    @property
    def mean(self) -> dict[str, np.ndarray]:
        return {k: v.mean(axis=0) for k, v in self.samples.items()}

    @property
    def std(self) -> dict[str, np.ndarray]:
        return {k: v.std(axis=0) for k, v in self.samples.items()}


def _trial_job(args):
    spec, seed, eta_value = args
    return trial_metrics(run_trial(spec, seed, eta_value))


def _run_many(spec: ExperimentSpec, eta_value=None) -> dict[str, np.ndarray]:
    jobs = [(spec, derive_seed(spec.seed, i), eta_value) for i in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=8))
    else:
        results = [_trial_job(j) for j in jobs]
    return {k: np.stack([r[k] for r in results]) for k in METRICS}


def run_experiment(spec: ExperimentSpec) -> AggregateSeries:
    """Run ``spec.trials`` seeded trials and aggregate them.

    In sweep mode every η value reuses the same trial seeds and the metrics are
    read at ``spec.eval_step``.
    """
    spec.validate()
    policy = PolicyKind(spec.policy).value
    if spec.eta.kind != "sweep":
        samples = _run_many(spec)
        return AggregateSeries(policy, spec.trials, np.arange(1, spec.horizon + 1), samples)
    values = spec.eta.sweep_values()
    cols = {k: [] for k in METRICS}
    for value in values:
        log.debug("sweep %s eta=%d", policy, value)
        res = _run_many(spec, value)
        for k in METRICS:
            cols[k].append(res[k][:, spec.eval_step - 1])
    samples = {k: np.stack(v, axis=1) for k, v in cols.items()}
    return AggregateSeries(policy, spec.trials, np.array(values), samples, index_name="eta")


@dataclass
class TransitionEstimate:
    runs: int
    patterns: dict[str, int]

    @property
    def frequencies(self) -> dict[str, float]:
        return {k: c / self.runs for k, c in self.patterns.items()}

    @property
    def compromise_counts(self) -> dict[int, float]:
        """Distribution of the number of crashed VMs in the next state."""
        out = Counter()
        for k, c in self.patterns.items():
            out[k.count("1")] += c
        return {k: out[k] / self.runs for k in sorted(out)}


def estimate_transition_distribution(config: GameConfig, runs: int = 10000, state=None,
                                     observation=None, attack=None, defend=None,
                                     seed: int = 0) -> TransitionEstimate:
    """Histogram of next states from one fixed (state, observation, actions) tuple.

    Defaults: all VMs healthy, nothing flagged, every VM attacked, no shuffles.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    config.validate()
    n = config.n
    s = np.zeros(n, np.uint8) if state is None else np.asarray(state, np.uint8)
    o = np.zeros(n, np.uint8) if observation is None else np.asarray(observation, np.uint8)
    a = frozenset(range(n)) if attack is None else frozenset(attack)
    d = EMPTY_ACTION if defend is None else frozenset(defend)
    outcomes = transit_batch(s, o, d, a, config, RandomSource(seed), runs)
    keys = ["".join(map(str, row)) for row in outcomes.tolist()]
    counts = Counter(keys)
    return TransitionEstimate(runs, {k: counts[k] for k in sorted(counts)})


DDOS_POLICIES = (PolicyKind.NONE, PolicyKind.RANDOM, PolicyKind.CES)


def ddos_scenario(spec: ExperimentSpec,
                  policies: Sequence[PolicyKind | str] = DDOS_POLICIES) -> dict[str, AggregateSeries]:
    """Crashed-VM series under the sequential flood for each policy (same trial seeds)."""
    if spec.attacker_mode != "sequential-ddos":
        raise ConfigError("attacker_mode", "the DDoS scenario needs attacker_mode = sequential-ddos")
    return {PolicyKind(p).value: run_experiment(spec.with_policy(p)) for p in policies}


def steady_state(series: AggregateSeries, metric: str = "crashed_vms", tail: float = 0.5) -> np.ndarray:
    """Per-trial mean of ``metric`` over the last ``tail`` fraction of the steps."""
    values = series.samples[metric]
    start = int(np.floor(values.shape[1] * (1 - tail)))
    return values[:, start:].mean(axis=1)
