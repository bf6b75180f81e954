"""Seeded random source shared by every stochastic routine.

All draws go through :class:`RandomSource` so that a trial is fully
reproducible from its seed. Per-trial seeds come from :func:`derive_seed`.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(base_seed: int, index: int) -> int:
    """Derive an independent 64-bit seed for trial ``index`` of an experiment.

    Uses numpy's ``SeedSequence`` hashing over ``(base_seed, index)``, so
    neighbouring indices give statistically unrelated streams.
    """
    ss = np.random.SeedSequence([base_seed & _MASK64, index & _MASK64])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class RandomSource:
    """Thin wrapper over a PCG64 generator.

    Identical seed plus identical call sequence gives identical draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size=None):
        """Uniform draws on [0, 1); a vector draw consumes values in index order."""
        return self._gen.random(size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers on [low, high)."""
        return self._gen.integers(low, high, size=size)

    def choice(self, items):
        """Pick one element of a non-empty sequence uniformly."""
        return items[int(self._gen.integers(0, len(items)))]

    def permutation(self, n_or_items):
        return self._gen.permutation(n_or_items)

    def binomial(self, n: int, p: float, size=None):
        return self._gen.binomial(n, p, size=size)

    def spawn(self, k: int) -> list[RandomSource]:
        """Split off ``k`` child sources with independent streams."""
        return [RandomSource(derive_seed(self.seed, i)) for i in range(k)]
