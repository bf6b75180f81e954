"""VM placement matrices (segment, port, users), their constraints and shuffle pricing.

All three matrices are VM-major: row ``i`` belongs to VM ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from shufflegame.game import GameConfig, Weights
from shufflegame.rng import RandomSource

# constraint names used in Violation.constraint
SEGMENT_COVERED = "segment_covered"      # every segment hosts >= 1 VM
ONE_SEGMENT = "one_segment_per_vm"      # every VM sits in exactly one segment
PORT_SHARE = "port_share"               # a port is shared by at most n VMs
ONE_PORT = "one_port_per_vm"            # every VM exposes exactly one service port
ONE_VM_PER_USER = "one_vm_per_user"     # every user is served by exactly one VM
VM_CAPACITY = "vm_capacity"             # a VM serves at most m users
SHAPE = "shape"                         # matrix dimensions disagree with the config


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: int | None
    observed: object

    def __str__(self) -> str:
        where = "" if self.index is None else f"[{self.index}]"
        return f"{self.constraint}{where}: observed {self.observed}"


@dataclass(eq=False)
class Assignment:
    """Binary matrices ``x`` (n×r segments), ``y`` (n×u ports) and ``z`` (n×q users)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def copy(self) -> Assignment:
        return Assignment(self.x.copy(), self.y.copy(), self.z.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)
                and np.array_equal(self.z, other.z))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def segments(self) -> np.ndarray:
        """Segment index of each VM (assumes one segment per VM)."""
        return self.x.argmax(axis=1)

    def ports(self) -> np.ndarray:
        return self.y.argmax(axis=1)

    def segment_sizes(self) -> np.ndarray:
        return self.x.sum(axis=0)

    def users_of(self, vm: int) -> np.ndarray:
        """Sorted user indices served by ``vm``."""
        return np.flatnonzero(self.z[vm])

    def load(self) -> np.ndarray:
        return self.z.sum(axis=1)

    def changed_rows(self, other: Assignment) -> frozenset[int]:
        diff = ((self.x != other.x).any(axis=1) | (self.y != other.y).any(axis=1)
                | (self.z != other.z).any(axis=1))
        return frozenset(int(i) for i in np.flatnonzero(diff))

    # in-place moves used by the policies -------------------------------------------------

    def set_segment(self, vm: int, segment: int) -> None:
        self.x[vm] = 0
        self.x[vm, segment] = 1

    def set_port(self, vm: int, port: int) -> None:
        self.y[vm] = 0
        self.y[vm, port] = 1

    def swap_users(self, src: int, dst: int, outgoing: Iterable[int], incoming: Iterable[int]) -> None:
        """Move ``outgoing`` users from ``src`` to ``dst`` and ``incoming`` back, keeping loads."""
        outgoing = list(outgoing)
        incoming = list(incoming)
        if len(outgoing) != len(incoming):
            raise ValueError("a swap must exchange equally many users")
        self.z[src, outgoing] = 0
        self.z[dst, outgoing] = 1
        self.z[dst, incoming] = 0
        self.z[src, incoming] = 1


def random_initial_assignment(config: GameConfig, rng: RandomSource) -> Assignment:
    """Random placement satisfying every constraint with each VM serving exactly ``m`` users.

    Segments are dealt round-robin over a random VM order (so each is covered),
    ports are uniform, and a random user permutation is dealt ``m`` per VM.
    """
    n, m, q, r, u = config.n, config.m, config.q, config.r, config.u
    x = np.zeros((n, r), dtype=np.uint8)
    order = rng.permutation(n)
    x[order, np.arange(n) % r] = 1
    y = np.zeros((n, u), dtype=np.uint8)
    y[np.arange(n), rng.integers(0, u, size=n)] = 1
    z = np.zeros((n, q), dtype=np.uint8)
    users = rng.permutation(q)
    z[np.repeat(np.arange(n), m), users] = 1
    return Assignment(x, y, z)


def validate_assignment(a: Assignment, config: GameConfig) -> list[Violation]:
    """Every broken constraint, with the offending index and observed sum; empty when valid."""
    n, m, q, r, u = config.n, config.m, config.q, config.r, config.u
    out = []
    for name, mat, shape in (("x", a.x, (n, r)), ("y", a.y, (n, u)), ("z", a.z, (n, q))):
        if mat.shape != shape:
            out.append(Violation(SHAPE, None, f"{name} is {mat.shape}, expected {shape}"))
        elif not np.isin(mat, (0, 1)).all():
            out.append(Violation(SHAPE, None, f"{name} has non-binary entries"))
    if out:
        return out

    def collect(name, sums, ok):
        for i in np.flatnonzero(~ok(sums)):
            out.append(Violation(name, int(i), int(sums[i])))

    collect(SEGMENT_COVERED, a.x.sum(axis=0), lambda s: s >= 1)
    collect(ONE_SEGMENT, a.x.sum(axis=1), lambda s: s == 1)
    collect(PORT_SHARE, a.y.sum(axis=0), lambda s: s <= n)
    collect(ONE_PORT, a.y.sum(axis=1), lambda s: s == 1)
    collect(ONE_VM_PER_USER, a.z.sum(axis=0), lambda s: s == 1)
    collect(VM_CAPACITY, a.z.sum(axis=1), lambda s: s <= m)
    return out


def shuffle_cost(before: Assignment, after: Assignment, shuffled: Iterable[int],
                 weights: Weights) -> float:
    """Weighted count of flipped bits in the rows of the shuffled VMs."""
    rows = sorted(set(shuffled))
    if not rows:
        return 0.0
    dx = np.abs(after.x[rows].astype(int) - before.x[rows]).sum()
    dy = np.abs(after.y[rows].astype(int) - before.y[rows]).sum()
    dz = np.abs(after.z[rows].astype(int) - before.z[rows]).sum()
    return float(weights.ip * dx + weights.port * dy + weights.migration * dz)
