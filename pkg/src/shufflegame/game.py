"""Game state machine: configuration, observation model and state transition.

States, observations and actions are plain values:

* a system state is a length-``n`` uint8 array, 1 meaning the VM is crashed
  (compromised) and 0 healthy;
* an observation is a length-``n`` uint8 array of the defender's flags;
* attack and defend actions are ``frozenset`` of VM indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from shufflegame.rng import RandomSource

SystemState = np.ndarray
Observation = np.ndarray
AttackAction = frozenset
DefendAction = frozenset

EMPTY_ACTION: frozenset[int] = frozenset()


class ConfigError(ValueError):
    """A configuration value violates its declared range or a cross-field invariant."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Weights:
    """Operator weights for IP hopping, port hopping and migration."""

    ip: float = 0.2
    port: float = 0.1
    migration: float = 0.7

    @property
    def scan(self) -> float:
        # attacker re-scan of an IP and a port
        return self.ip + self.port


def _per_vm(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(name, f"expected a scalar or {n} values, got shape {arr.shape}")
    return arr.copy()


def _pairwise(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        out = np.full((n, n), float(arr))
    elif arr.shape == (n, n):
        out = arr.copy()
    else:
        raise ConfigError(name, f"expected a scalar or an {n}x{n} matrix, got shape {arr.shape}")
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class GameConfig:
    """Scenario parameters.

    Scalars given for per-VM fields are broadcast to every VM; the pivot
    matrix ``pivot_success[src, dst]`` has its diagonal forced to zero.
    Call :meth:`validate` before use (the entry points do).
    """

    n: int
    m: int
    q: int
    r: int
    u: int
    horizon: int = 10
    gamma: float = 0.9
    weights: Weights = field(default_factory=Weights)
    direct_success: np.ndarray | float = 0.5
    pivot_success: np.ndarray | float = 0.2
    confidence: np.ndarray | float = 0.9
    unit_reward_defender: np.ndarray | float = 1.0
    unit_reward_attacker: np.ndarray | float = 1.0
    unit_attack_cost: np.ndarray | float = 0.3
    pivot_combine: Literal["max", "independent_or"] = "max"
    tie_break: Literal["lowest", "all"] = "lowest"

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ConfigError("n", "need at least one VM")
        set_ = object.__setattr__
        set_(self, "direct_success", _per_vm(self.direct_success, n, "direct_success"))
        set_(self, "pivot_success", _pairwise(self.pivot_success, n, "pivot_success"))
        set_(self, "confidence", _per_vm(self.confidence, n, "confidence"))
        for name in ("unit_reward_defender", "unit_reward_attacker", "unit_attack_cost"):
            set_(self, name, _per_vm(getattr(self, name), n, name))
        for name in ("direct_success", "pivot_success", "confidence",
                     "unit_reward_defender", "unit_reward_attacker", "unit_attack_cost"):
            getattr(self, name).setflags(write=False)

    def validate(self) -> GameConfig:
        """Raise :class:`ConfigError` naming the first violated field."""
        for name in ("n", "m", "q", "r", "u", "horizon"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.m * self.n != self.q:
            raise ConfigError("q", f"m·n ≠ q ({self.m}·{self.n} != {self.q})")
        if self.r > self.n:
            raise ConfigError("r", f"r > n ({self.r} > {self.n}); some segment would stay empty")
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError("gamma", f"must lie in (0, 1], got {self.gamma}")
        for name in ("direct_success", "pivot_success", "confidence"):
            arr = getattr(self, name)
            if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
                raise ConfigError(name, "probabilities must lie in [0, 1]")
        for name in ("unit_reward_defender", "unit_reward_attacker", "unit_attack_cost"):
            if np.any(getattr(self, name) < 0):
                raise ConfigError(name, "magnitudes must be >= 0")
        w = self.weights
        for name in ("ip", "port", "migration"):
            if getattr(w, name) < 0:
                raise ConfigError(f"weights.{name}", "must be >= 0")
        if self.pivot_combine not in ("max", "independent_or"):
            raise ConfigError("pivot_combine", f"unknown rule {self.pivot_combine!r}")
        if self.tie_break not in ("lowest", "all"):
            raise ConfigError("tie_break", f"unknown rule {self.tie_break!r}")
        return self

    def replace(self, **changes) -> GameConfig:
        from dataclasses import replace

        return replace(self, **changes)


def reference_config(**overrides) -> GameConfig:
    """The 50-VM / 1000-user evaluation scenario with weights 0.2/0.1/0.7 and γ = 0.9."""
    params = dict(n=50, m=20, q=1000, r=20, u=100, horizon=10, gamma=0.9,
                  weights=Weights(0.2, 0.1, 0.7))
    params.update(overrides)
    return GameConfig(**params)


def as_action(vms: Iterable[int], n: int) -> frozenset[int]:
    action = frozenset(int(v) for v in vms)
    bad = [v for v in action if not 0 <= v < n]
    if bad:
        raise ValueError(f"VM ids out of range [0, {n}): {sorted(bad)}")
    return action


def _mask(action: Iterable[int], n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    idx = list(action)
    if idx:
        mask[idx] = True
    return mask


def init_game(config: GameConfig):
    """Return ``(S_0, O_0, A_0, D_0)``: all VMs healthy, nothing flagged, no actions."""
    config.validate()
    n = config.n
    return (np.zeros(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8),
            EMPTY_ACTION, EMPTY_ACTION)


def observe(s_t: SystemState, config: GameConfig, rng: RandomSource) -> Observation:
    """Noisy defender sensor: each bit is reported correctly with probability π(v)."""
    s = np.asarray(s_t, dtype=np.uint8)
    correct = rng.uniform(len(s)) < config.confidence
    return np.where(correct, s, 1 - s).astype(np.uint8)


def pivot_probabilities(s_t: SystemState, config: GameConfig) -> np.ndarray:
    """Per-VM probability of being reached from an already compromised VM."""
    src = np.asarray(s_t, dtype=bool)
    if not src.any():
        return np.zeros(len(src))
    probs = config.pivot_success[src]
    if config.pivot_combine == "max":
        return probs.max(axis=0)
    return 1.0 - np.prod(1.0 - probs, axis=0)


def transition_from_uniforms(s_t, o_t, defended: np.ndarray, attacked: np.ndarray,
                             config: GameConfig, draws: np.ndarray) -> np.ndarray:
    """Apply the transition rule given pre-drawn uniforms.

    ``draws`` has shape ``(..., n)``; each row is one independent outcome and
    the result has the same shape. One uniform per VM is used whether or not
    the VM's branch is random, which couples outcomes across parameter values.
    """
    s = np.asarray(s_t, dtype=np.uint8)
    o = np.asarray(o_t, dtype=np.uint8)
    crashed = s == 1
    false_positive = (o == 1) & ~crashed

    # every branch reduces to "crash iff draw < threshold(v)"; draws lie in [0, 1)
    # so a threshold of 1 always crashes and 0 never does.
    # undefended: direct attack may crash; an over-reported healthy VM that is
    # not attacked is exposed to pivoting from crashed neighbours
    stay = crashed.astype(float)
    threshold = np.where(attacked, np.where(crashed, 1.0, config.direct_success),
                         np.where(false_positive, pivot_probabilities(s, config), stay))
    threshold = np.where(defended, 0.0, threshold)
    return (draws < threshold).astype(np.uint8)


def transit_state(s_t: SystemState, o_t: Observation, d_next: Iterable[int],
                  a_next: Iterable[int], config: GameConfig,
                  rng: RandomSource) -> SystemState:
    """Sample ``S_{t+1}`` from ``S_t``, ``O_t`` and both players' next actions.

    Per VM ``v``:

    * ``v`` in the defend action: always restored to 0;
    * attacked and not defended: crashes with probability ``p(v)``, a crashed
      VM stays crashed;
    * neither attacked nor defended, observation consistent: unchanged;
    * neither, but flagged while actually healthy: crashed with the pivot
      probability from currently compromised VMs.
    """
    s = np.asarray(s_t, dtype=np.uint8)
    n = config.n
    if len(s) != n or len(o_t) != n:
        raise ValueError(f"state/observation length must be {n}")
    draws = rng.uniform(n)
    return transition_from_uniforms(s, o_t, _mask(d_next, n), _mask(a_next, n), config, draws)


def transit_batch(s_t, o_t, d_next, a_next, config: GameConfig, rng: RandomSource,
                  runs: int) -> np.ndarray:
    """``runs`` independent transitions from one tuple; row ``k`` equals the k-th
    sequential :func:`transit_state` call on the same generator."""
    n = config.n
    draws = rng.uniform((runs, n))
    return transition_from_uniforms(s_t, o_t, _mask(d_next, n), _mask(a_next, n), config, draws)
