"""Heuristic best-response strategies, per-step rewards/costs and discounted payoffs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from shufflegame.game import EMPTY_ACTION, GameConfig

_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepRecord:
    """One game step; ``t`` is the 1-based label of the step that produced ``state_after``."""

    t: int
    state_before: np.ndarray
    observation: np.ndarray
    attack: frozenset
    defend: frozenset
    state_after: np.ndarray
    defender_reward: float
    defender_cost: float
    attacker_reward: float
    attacker_cost: float


@dataclass
class GameHistory:
    config: GameConfig
    records: list[StepRecord] = field(default_factory=list)
    # placement snapshots, filled only when a trial is asked to keep them
    assignments: list = field(default_factory=list)

    def append(self, record: StepRecord) -> None:
        expected = len(self.records) + 1
        if record.t != expected:
            raise ValueError(f"history must be contiguous: expected t={expected}, got {record.t}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class PayoffLedger:
    defender_payoff: float
    attacker_payoff: float


def _select(scores: dict[int, float] | np.ndarray, candidates, keep_all: bool) -> frozenset[int]:
    """Return the arg-max set of ``candidates`` (empty when the best score is <= 0)."""
    if len(candidates) == 0:
        return EMPTY_ACTION
    vals = np.asarray([scores[c] for c in candidates])
    best = vals.max()
    if best <= 0:
        return EMPTY_ACTION
    winners = sorted(c for c, s in zip(candidates, vals) if s >= best - _TIE_TOL)
    return frozenset(winners if keep_all else winners[:1])


def potential_attack_targets(s_t, config: GameConfig) -> dict[int, bool]:
    """Healthy VMs the attacker can act on, mapped to whether each is also a pivot origin."""
    healthy = np.flatnonzero(np.asarray(s_t) == 0)
    reaches = (config.pivot_success > 0).any(axis=1)
    return {int(v): bool(reaches[v]) for v in healthy}


def attack_scores(s_t, t: int, config: GameConfig, attack_cost=None) -> dict[int, float]:
    """Best discounted payoff per targetable VM over its direct and pivot candidates.

    A direct candidate on healthy ``v`` scores ``γ^t (p(v) R^a(v) - C^a(v))``;
    a pivot candidate (healthy ``v'`` towards healthy ``v``) scores
    ``γ^t (p(v',v) R^a(v') - C^a(v'))`` and targets ``v'``.
    """
    cost = config.unit_attack_cost if attack_cost is None else np.asarray(attack_cost, float)
    reward = config.unit_reward_attacker
    healthy = np.asarray(s_t) == 0
    disc = config.gamma ** t
    direct = disc * (config.direct_success * reward - cost)
    # pivot[v', v] for both endpoints healthy and v' != v
    pivot = disc * (config.pivot_success * reward[:, None] - cost[:, None])
    allowed = healthy[:, None] & healthy[None, :]
    np.fill_diagonal(allowed, False)
    pivot_best = np.where(allowed, pivot, -np.inf).max(axis=1, initial=-np.inf)
    best = np.maximum(direct, pivot_best)
    return {int(v): float(best[v]) for v in np.flatnonzero(healthy)}


def attack_strategy(s_t, t: int, config: GameConfig, attack_cost=None,
                    keep_all: bool | None = None) -> frozenset[int]:
    """Attacker's next action: the VMs reaching the best positive payoff, else ∅.

    ``keep_all`` defaults to ``config.tie_break == "all"``; otherwise only the
    lowest-id maximizer is returned.
    """
    if keep_all is None:
        keep_all = config.tie_break == "all"
    scores = attack_scores(s_t, t, config, attack_cost)
    return _select(scores, sorted(scores), keep_all)


def potential_defend_targets(o_t, d_t: Iterable[int]) -> frozenset[int]:
    o = np.asarray(o_t)
    done = set(d_t)
    return frozenset(int(v) for v in range(len(o)) if o[v] == 1 or v not in done)


def defend_scores(o_t, d_t: Iterable[int], t: int, config: GameConfig,
                  shuffle_costs: Sequence[float] | None = None) -> dict[int, float]:
    o = np.asarray(o_t)
    n = len(o)
    cost = np.zeros(n) if shuffle_costs is None else np.asarray(shuffle_costs, dtype=float)
    value = config.confidence * config.unit_reward_defender
    disc = config.gamma ** t
    scores = {}
    for v in sorted(potential_defend_targets(o, d_t)):
        if o[v] == 1:
            scores[v] = disc * (value[v] - cost[v])
        else:
            if n == 1:
                raise ValueError("defend strategy needs n >= 2 to score an unflagged VM (divides by n-1)")
            scores[v] = disc * (value[v] / (n - 1) - cost[v])
    return scores


def defend_strategy(o_t, d_t: Iterable[int], t: int, config: GameConfig,
                    shuffle_costs: Sequence[float] | None = None,
                    keep_all: bool | None = None) -> frozenset[int]:
    """Defender's next action from its observation and its previous action.

    ``shuffle_costs`` supplies the per-VM shuffle price ``C^d(v)``; zero when omitted.
    """
    if keep_all is None:
        keep_all = config.tie_break == "all"
    scores = defend_scores(o_t, d_t, t, config, shuffle_costs)
    return _select(scores, sorted(scores), keep_all)


def step_rewards(s_t, s_next, config: GameConfig) -> tuple[float, float]:
    """(defender, attacker) rewards: recoveries 1→0 and new crashes 0→1."""
    s = np.asarray(s_t)
    nxt = np.asarray(s_next)
    if s.shape != nxt.shape:
        raise ValueError("state lengths differ")
    recovered = (s == 1) & (nxt == 0)
    crashed = (s == 0) & (nxt == 1)
    return (float(config.unit_reward_defender[recovered].sum()),
            float(config.unit_reward_attacker[crashed].sum()))


def attacker_step_cost(d_next: Iterable[int], a_next: Iterable[int], config: GameConfig) -> float:
    """Migration weight per shuffled VM plus IP+port scanning per VM left alone by both sides."""
    d = set(d_next)
    a = set(a_next)
    idle = sum(1 for v in range(config.n) if v not in d and v not in a)
    w = config.weights
    return len(d) * w.migration + idle * (w.ip + w.port)


def cumulative_payoffs(history: GameHistory | Sequence[StepRecord], gamma: float) -> PayoffLedger:
    """Discounted net payoff of both players; the first step is undiscounted."""
    records = history.records if isinstance(history, GameHistory) else list(history)
    pd = pa = 0.0
    disc = 1.0
    for rec in records:
        pd += disc * (rec.defender_reward - rec.defender_cost)
        pa += disc * (rec.attacker_reward - rec.attacker_cost)
        disc *= gamma
    return PayoffLedger(pd, pa)
