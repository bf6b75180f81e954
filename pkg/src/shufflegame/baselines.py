"""Reference shuffling policies sharing the CES call signature.

Every policy is ``policy(o_t, a_t, eta, t, config, rng) -> ShuffleDecision``
and acts only on VMs flagged in ``o_t``.
"""

from __future__ import annotations

import enum
from functools import partial
from typing import Callable

import numpy as np

from shufflegame.assignment import Assignment
from shufflegame.ces import ShuffleDecision, ces_decide, migrate_online_users
from shufflegame.game import GameConfig
from shufflegame.rng import RandomSource

Policy = Callable[..., ShuffleDecision]


class PolicyKind(str, enum.Enum):
    NONE = "none"
    RANDOM = "random"
    RRT = "rrt"
    CSA = "csa"
    CES = "ces"


def _finish(a_t: Assignment, nxt: Assignment, moves, degraded=()) -> ShuffleDecision:
    return ShuffleDecision(nxt, a_t.changed_rows(nxt), moves=moves, degraded=frozenset(degraded))


def _eligible_targets(a: Assignment, vm: int, flagged: np.ndarray) -> list[int]:
    return [w for w in range(a.n) if w != vm and not flagged[w]]


def _hop_segment(a: Assignment, vm: int, config: GameConfig, rng: RandomSource) -> bool:
    """Move ``vm`` to a random other segment if that keeps its current segment covered."""
    seg = int(a.segments()[vm])
    if config.r < 2 or a.segment_sizes()[seg] < 2:
        return False
    others = [s for s in range(config.r) if s != seg]
    a.set_segment(vm, rng.choice(others))
    return True


def _hop_port(a: Assignment, vm: int, config: GameConfig, rng: RandomSource) -> bool:
    port = int(a.ports()[vm])
    if config.u < 2:
        return False
    others = [p for p in range(config.u) if p != port]
    a.set_port(vm, rng.choice(others))
    return True


def no_shuffle_policy(o_t, a_t: Assignment, eta, t: int, config: GameConfig,
                      rng: RandomSource) -> ShuffleDecision:
    return ShuffleDecision(a_t.copy(), frozenset())


def random_shuffle_policy(o_t, a_t: Assignment, eta, t: int, config: GameConfig,
                          rng: RandomSource) -> ShuffleDecision:
    """Each flagged VM gets one uniformly chosen move: IP hop, port hop or migration.

    An infeasible IP hop or migration degrades to a port hop.
    """
    o = np.asarray(o_t)
    eta = np.asarray(eta, dtype=int)
    flagged = o == 1
    nxt = a_t.copy()
    moves, degraded = {}, set()
    for v in np.flatnonzero(flagged):
        v = int(v)
        kind = rng.choice(("ip", "port", "migrate"))
        done = False
        if kind == "ip":
            done = _hop_segment(nxt, v, config, rng)
        elif kind == "migrate":
            k = int(eta[v])
            load = nxt.load()
            targets = [w for w in _eligible_targets(nxt, v, flagged) if load[w] - eta[w] >= k]
            if k > 0 and targets:
                migrate_online_users(nxt, v, rng.choice(targets), k)
                done = True
        if not done and kind != "port":
            degraded.add(v)
        if kind == "port" or not done:
            _hop_port(nxt, v, config, rng)
        moves[v] = kind
    return _finish(a_t, nxt, moves, degraded)


def rrt_policy(o_t, a_t: Assignment, eta, t: int, config: GameConfig, rng: RandomSource,
               interval: int = 1) -> ShuffleDecision:
    """Renewal-style full shuffle: every flagged VM is IP-hopped and all its users migrated.

    Ignores online users entirely. Acts only on steps where ``t % interval == 0``.
    """
    if interval < 1:
        raise ValueError("interval must be >= 1")
    nxt = a_t.copy()
    if t % interval:
        return _finish(a_t, nxt, {})
    flagged = np.asarray(o_t) == 1
    moves, degraded = {}, set()
    for v in np.flatnonzero(flagged):
        v = int(v)
        users = list(nxt.users_of(v))
        targets = _eligible_targets(nxt, v, flagged)
        # spread the users over as many targets as it takes to send back as many
        while users and targets:
            w = targets.pop(int(rng.integers(0, len(targets))))
            back = list(nxt.users_of(w))[: len(users)]
            out = users[: len(back)]
            nxt.swap_users(v, w, out, back)
            users = users[len(back):]
        if users:
            degraded.add(v)
        _hop_segment(nxt, v, config, rng)
        moves[v] = "ip+migrate"
    return _finish(a_t, nxt, moves, degraded)


def csa_policy(o_t, a_t: Assignment, eta, t: int, config: GameConfig,
               rng: RandomSource) -> ShuffleDecision:
    """Migrate a uniformly random half (rounded down) of each flagged VM's users; no hops."""
    flagged = np.asarray(o_t) == 1
    nxt = a_t.copy()
    moves, degraded = {}, set()
    for v in np.flatnonzero(flagged):
        v = int(v)
        users = nxt.users_of(v)
        half = len(users) // 2
        moves[v] = "migrate"
        if half == 0:
            continue
        picked = [int(i) for i in rng.permutation(users)[:half]]
        targets = _eligible_targets(nxt, v, flagged)
        if not targets:
            degraded.add(v)
            continue
        w = rng.choice(targets)
        back = [int(i) for i in rng.permutation(nxt.users_of(w))[:half]]
        picked = picked[: len(back)]
        nxt.swap_users(v, w, picked, back)
    return _finish(a_t, nxt, moves, degraded)


def get_policy(kind: PolicyKind | str, rrt_interval: int = 1) -> Policy:
    kind = PolicyKind(kind)
    if kind is PolicyKind.NONE:
        return no_shuffle_policy
    if kind is PolicyKind.RANDOM:
        return random_shuffle_policy
    if kind is PolicyKind.RRT:
        return partial(rrt_policy, interval=rrt_interval)
    if kind is PolicyKind.CSA:
        return csa_policy
    return ces_decide
