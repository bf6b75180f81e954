"""Attacker/defender shuffling game for moving-target DDoS defense."""

from shufflegame.game import ConfigError, GameConfig, Weights, init_game, observe, reference_config, transit_state
from shufflegame.rng import RandomSource, derive_seed

__all__ = [
    "ConfigError",
    "GameConfig",
    "RandomSource",
    "Weights",
    "derive_seed",
    "init_game",
    "observe",
    "reference_config",
    "transit_state",
]
