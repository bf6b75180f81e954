"""Cost-effective shuffling: per flagged VM, pick the move with the best defender-minus-attacker value.

The move space for one VM is every (segment, port) pair combined with either
no migration or migrating its online users to the least-loaded eligible VM.
Migration is a swap: the online users leave and the same number of the
target's offline users come back, so every VM keeps its user count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shufflegame.assignment import Assignment
from shufflegame.game import GameConfig
from shufflegame.rng import RandomSource

_TIE_TOL = 1e-12


@dataclass(eq=False)
class ShuffleDecision:
    """Outcome of one policy call.

    ``shuffled`` are the VMs whose rows changed; ``parked`` are flagged VMs with
    no online users, reset in place at no shuffle cost. Both are restored by the
    transition, so the defender's action is their union.
    """

    next: Assignment
    shuffled: frozenset[int]
    parked: frozenset[int] = frozenset()
    moves: dict[int, str] = field(default_factory=dict)
    scores: dict[int, float] = field(default_factory=dict)
    degraded: frozenset[int] = frozenset()

    @property
    def defend(self) -> frozenset[int]:
        return self.shuffled | self.parked


def migration_allowed(eta_v: int, m: int) -> bool:
    """Online users may be migrated only while at most half the VM's capacity is online."""
    return 0 < eta_v <= m // 2


def move_value(vm: int, changed: bool, cost: float, config: GameConfig) -> float:
    """One-step estimate of defender payoff minus attacker payoff for a move on a flagged VM.

    A flagged VM is believed crashed with probability π(v). Changing it restores
    it (expected recovery π·R^d, minus the shuffle cost); the attacker is assumed
    to re-target it with probability p(v) and pays the migration weight for
    chasing a shuffled VM. Leaving it alone denies the defender anything and lets
    the attacker crash it if the flag was wrong.
    """
    b = config.confidence[vm]
    p = config.direct_success[vm]
    attacker_gain = p * config.unit_reward_attacker[vm]
    if not changed:
        return -(1.0 - b) * attacker_gain
    defender = b * config.unit_reward_defender[vm] - cost
    attacker = attacker_gain - config.weights.migration
    return float(defender - attacker)


def pick_migration_target(a: Assignment, vm: int, k: int, flagged: np.ndarray, eta,
                          excluded: set[int]) -> int | None:
    """Least-loaded (fewest online users) unflagged VM able to send ``k`` offline users back."""
    load = a.z.sum(axis=1)
    best = None
    for w in range(a.n):
        if w == vm or flagged[w] or w in excluded:
            continue
        if load[w] - eta[w] < k:
            continue
        if best is None or eta[w] < eta[best]:
            best = w
    return best


def migrate_online_users(a: Assignment, vm: int, target: int, k: int) -> None:
    """Swap ``vm``'s first ``k`` users (its online ones) with ``target``'s last ``k``."""
    outgoing = a.users_of(vm)[:k]
    incoming = a.users_of(target)[-k:]
    a.swap_users(vm, target, outgoing, incoming)


def _grid(a: Assignment, vm: int, config: GameConfig, migration_cost: float | None):
    """Cost and changed-flag for every (segment, port, migrate) candidate; inadmissible = NaN."""
    w = config.weights
    seg = a.segments()[vm]
    port = a.ports()[vm]
    seg_cost = np.where(np.arange(config.r) == seg, 0.0, 2 * w.ip)
    if a.segment_sizes()[seg] < 2:
        # leaving would empty the segment
        seg_cost[np.arange(config.r) != seg] = np.nan
    port_cost = np.where(np.arange(config.u) == port, 0.0, 2 * w.port)
    base = seg_cost[:, None] + port_cost[None, :]
    moved = (np.arange(config.r) != seg)[:, None] | (np.arange(config.u) != port)[None, :]
    mig = np.nan if migration_cost is None else migration_cost
    cost = np.stack([base, base + mig], axis=-1)
    changed = np.stack([moved, np.ones_like(moved)], axis=-1)
    return cost, changed


def ces_decide(o_t, a_t: Assignment, eta, t: int, config: GameConfig,
               rng: RandomSource, candidates=None) -> ShuffleDecision:
    """Choose shuffles for every flagged VM, in ascending id order.

    ``candidates`` optionally restricts which flagged VMs may be acted on.
    Equal-valued best moves are broken uniformly at random with ``rng``.
    """
    o = np.asarray(o_t)
    eta = np.asarray(eta, dtype=int)
    flagged = o == 1
    nxt = a_t.copy()
    parked, degraded, used_targets = set(), set(), set()
    moves, scores = {}, {}
    allowed = set(range(config.n)) if candidates is None else set(candidates)

    for v in np.flatnonzero(flagged):
        v = int(v)
        if v not in allowed:
            continue
        k = int(eta[v])
        if k == 0:
            parked.add(v)
            moves[v] = "park"
            continue
        target = None
        if migration_allowed(k, config.m):
            target = pick_migration_target(nxt, v, k, flagged, eta, used_targets)
            if target is None:
                degraded.add(v)
        mig_cost = None if target is None else config.weights.migration * 4 * k
        cost, changed = _grid(nxt, v, config, mig_cost)
        null_value = move_value(v, False, 0.0, config)
        changed_value = move_value(v, True, 0.0, config)
        values = np.where(changed, changed_value - cost, null_value)
        values = np.where(np.isnan(cost), -np.inf, values)
        best = values.max()
        ties = np.argwhere(values >= best - _TIE_TOL)
        pick = ties[int(rng.integers(0, len(ties)))] if len(ties) > 1 else ties[0]
        s_new, p_new, mig = (int(i) for i in pick)
        scores[v] = float(values[s_new, p_new, mig])

        seg, port = int(nxt.segments()[v]), int(nxt.ports()[v])
        kinds = []
        if s_new != seg:
            nxt.set_segment(v, s_new)
            kinds.append("ip")
        if p_new != port:
            nxt.set_port(v, p_new)
            kinds.append("port")
        if mig:
            migrate_online_users(nxt, v, target, k)
            used_targets.add(target)
            kinds.append("migrate")
        moves[v] = "+".join(kinds) or "stay"

    return ShuffleDecision(nxt, a_t.changed_rows(nxt), frozenset(parked), moves, scores,
                           frozenset(degraded))


def cheapest_shuffle_costs(a: Assignment, eta, config: GameConfig, o_t=None) -> np.ndarray:
    """Per-VM price of the cheapest admissible move that changes the VM (``inf`` if none).

    VMs without online users are parked for free, so their price is 0.
    """
    eta = np.asarray(eta, dtype=int)
    flagged = np.zeros(config.n, bool) if o_t is None else np.asarray(o_t) == 1
    w = config.weights
    sizes = a.segment_sizes()
    segs = a.segments()
    out = np.full(config.n, np.inf)
    for v in range(config.n):
        if eta[v] == 0:
            out[v] = 0.0
            continue
        options = []
        if config.u >= 2:
            options.append(2 * w.port)
        if config.r >= 2 and sizes[segs[v]] >= 2:
            options.append(2 * w.ip)
        if migration_allowed(int(eta[v]), config.m) and \
                pick_migration_target(a, v, int(eta[v]), flagged, eta, set()) is not None:
            options.append(4 * int(eta[v]) * w.migration)
        if options:
            out[v] = min(options)
    return out
