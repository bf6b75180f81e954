"""Experiment spec documents: TOML with ``[game]``, ``[weights]``, ``[probabilities]``
and ``[experiment]`` sections. Unknown sections or keys are rejected.

Example::

    [game]
    n = 50
    m = 20
    q = 1000
    r = 20
    u = 100
    horizon = 10
    gamma = 0.9

    [weights]
    ip = 0.2
    port = 0.1
    migration = 0.7

    [probabilities]
    direct_success = 0.5
    pivot_success = 0.2
    confidence = 0.9

    [experiment]
    policies = ["ces", "rrt", "csa"]
    trials = 200
    seed = 42
    eta_mode = "uniform"
    eta_lo = 0
    eta_hi = 20
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from shufflegame.baselines import PolicyKind
from shufflegame.game import ConfigError, GameConfig, Weights
from shufflegame.harness import EtaMode, ExperimentSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

GAME_KEYS = {"n", "m", "q", "r", "u", "horizon", "gamma", "unit_reward_defender",
             "unit_reward_attacker", "unit_attack_cost", "pivot_combine", "tie_break"}
WEIGHT_KEYS = {"ip", "port", "migration"}
PROB_KEYS = {"direct_success", "pivot_success", "confidence"}
EXPERIMENT_KEYS = {"policies", "trials", "seed", "attacker_mode", "eval_step", "use_defend_gate",
                   "rrt_interval", "workers", "eta_mode", "eta", "eta_lo", "eta_hi", "eta_series",
                   "eta_spread", "probe_runs", "probe_state", "probe_observation", "probe_attack",
                   "probe_defend"}
SECTIONS = {"game": GAME_KEYS, "weights": WEIGHT_KEYS, "probabilities": PROB_KEYS,
            "experiment": EXPERIMENT_KEYS}
PRESETS = ("fig1.spec", "fig2.spec", "fig7.spec")


@dataclass(frozen=True)
class ProbeSettings:
    runs: int = 10000
    state: tuple | None = None
    observation: tuple | None = None
    attack: tuple | None = None
    defend: tuple | None = None


@dataclass(frozen=True)
class SpecDocument:
    experiment: ExperimentSpec
    policies: tuple[PolicyKind, ...]
    probe: ProbeSettings = field(default_factory=ProbeSettings)

    def for_policy(self, policy) -> ExperimentSpec:
        return self.experiment.with_policy(policy)


def _int(table: dict, key: str, section: str, default=None):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(key, f"[{section}] {key} must be an integer")
    return val


def _num(table: dict, key: str, default):
    if key not in table:
        return default
    val = table[key]
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(key, "must be a number or a list of numbers") from None
    return float(arr) if arr.ndim == 0 else arr


def parse_spec(text: str) -> SpecDocument:
    """Parse and validate a spec document; raises :class:`ConfigError` naming the bad field."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("document", f"not valid TOML: {exc}") from None
    for section, table in doc.items():
        if section not in SECTIONS:
            raise ConfigError(section, f"unknown section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(section, f"[{section}] must be a table")
        unknown = set(table) - SECTIONS[section]
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(name, f"unknown key {name!r} in [{section}]")

    game = doc.get("game", {})
    for key in ("n", "m", "q", "r", "u"):
        if key not in game:
            raise ConfigError(key, f"[game] {key} is required")
    w = doc.get("weights", {})
    probs = doc.get("probabilities", {})
    weights = Weights(_num(w, "ip", 0.2), _num(w, "port", 0.1), _num(w, "migration", 0.7))
    config = GameConfig(
        n=_int(game, "n", "game"), m=_int(game, "m", "game"), q=_int(game, "q", "game"),
        r=_int(game, "r", "game"), u=_int(game, "u", "game"),
        horizon=_int(game, "horizon", "game", 10),
        gamma=_num(game, "gamma", 0.9),
        weights=weights,
        direct_success=_num(probs, "direct_success", 0.5),
        pivot_success=_num(probs, "pivot_success", 0.2),
        confidence=_num(probs, "confidence", 0.9),
        unit_reward_defender=_num(game, "unit_reward_defender", 1.0),
        unit_reward_attacker=_num(game, "unit_reward_attacker", 1.0),
        unit_attack_cost=_num(game, "unit_attack_cost", 0.3),
        pivot_combine=game.get("pivot_combine", "max"),
        tie_break=game.get("tie_break", "lowest"),
    )

    ex = doc.get("experiment", {})
    raw_policies = ex.get("policies", ["ces"])
    if isinstance(raw_policies, str):
        raw_policies = [raw_policies]
    try:
        policies = tuple(PolicyKind(p) for p in raw_policies)
    except ValueError:
        raise ConfigError("policies", f"unknown policy in {raw_policies}; "
                          f"choose from {[k.value for k in PolicyKind]}") from None
    if not policies:
        raise ConfigError("policies", "at least one policy is required")

    eta = EtaMode(
        kind=ex.get("eta_mode", "fixed"),
        value=_int(ex, "eta", "experiment", min(10, config.m)),
        lo=_int(ex, "eta_lo", "experiment", 0),
        hi=_int(ex, "eta_hi", "experiment", config.m),
        series=tuple(ex.get("eta_series", ())),
        spread=ex.get("eta_spread", "exact"),
    )
    horizon = config.horizon
    spec = ExperimentSpec(
        config=config,
        policy=policies[0],
        trials=_int(ex, "trials", "experiment", 200),
        seed=_int(ex, "seed", "experiment", 0),
        eta=eta,
        attacker_mode=ex.get("attacker_mode", "strategic"),
        eval_step=_int(ex, "eval_step", "experiment", min(10, horizon)),
        use_defend_gate=bool(ex.get("use_defend_gate", False)),
        rrt_interval=_int(ex, "rrt_interval", "experiment", 1),
        workers=_int(ex, "workers", "experiment", 1),
    )
    spec.validate()

    def vec(key):
        return None if key not in ex else tuple(int(x) for x in ex[key])

    probe = ProbeSettings(runs=_int(ex, "probe_runs", "experiment", 10000),
                          state=vec("probe_state"), observation=vec("probe_observation"),
                          attack=vec("probe_attack"), defend=vec("probe_defend"))
    if probe.runs < 1:
        raise ConfigError("probe_runs", "must be >= 1")
    for key, val in (("probe_state", probe.state), ("probe_observation", probe.observation)):
        if val is not None and (len(val) != config.n or set(val) - {0, 1}):
            raise ConfigError(key, f"must be {config.n} bits")
    for key, val in (("probe_attack", probe.attack), ("probe_defend", probe.defend)):
        if val is not None and any(not 0 <= v < config.n for v in val):
            raise ConfigError(key, f"VM ids must lie in [0, {config.n})")
    return SpecDocument(spec, policies, probe)


def preset_text(name: str) -> str:
    return resources.files("shufflegame").joinpath("presets", name).read_text(encoding="utf-8")


def load_spec(path: str | Path) -> SpecDocument:
    """Load a spec file, falling back to a bundled preset of the same name."""
    p = Path(path)
    if p.exists():
        return parse_spec(p.read_text(encoding="utf-8"))
    name = p.name if p.name.endswith(".spec") else f"{p.name}.spec"
    if name in PRESETS:
        return parse_spec(preset_text(name))
    raise FileNotFoundError(f"no spec file or preset named {str(path)!r}")


def override(doc: SpecDocument, seed=None, trials=None, policies=None) -> SpecDocument:
    spec = doc.experiment
    if seed is not None:
        spec = replace(spec, seed=seed)
    if trials is not None:
        spec = replace(spec, trials=trials)
    pols = doc.policies
    if policies:
        pols = tuple(PolicyKind(p) for p in policies)
        spec = replace(spec, policy=pols[0])
    spec.validate()
    return replace(doc, experiment=spec, policies=pols)
