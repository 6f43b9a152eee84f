"""Exact occupancy combinatorics for tags thrown into equiprobable slots."""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from constants import MASS_FLOOR, MAX_ENUMERATION

Outcome = Tuple[int, int]  # (successes, collisions)

_CHUNK = 1 << 20


@dataclass(frozen=True)
class OccupancyDistribution:
    """Joint law of (success slots, collided slots) for n tags in r slots."""

    n: int
    r: int
    mass: Mapping[Outcome, float] = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mass", MappingProxyType(dict(self.mass)))

    def __getitem__(self, outcome: Outcome) -> float:
        return self.mass.get(outcome, 0.0)

    def __iter__(self) -> Iterator[Tuple[int, int, float]]:
        for (s, c), p in sorted(self.mass.items()):
            yield s, c, p

    def total(self) -> float:
        return math.fsum(self.mass.values())

    def expected_successes(self) -> float:
        return math.fsum(s * p for (s, _), p in self.mass.items())

    def expected_collisions(self) -> float:
        return math.fsum(c * p for (_, c), p in self.mass.items())


def _check_sizes(n: int, r: int) -> None:
    if n < 0:
        raise ValueError(f"tag count must be non-negative, got {n}")
    if r < 1:
        raise ValueError(f"slot count must be at least 1, got {r}")


@lru_cache(maxsize=4096)
def joint_outcome_distribution(n: int, r: int) -> OccupancyDistribution:
    """
    Exact distribution of (successes, collisions) when n tags pick one of r slots.

    Tags are placed one at a time. After k tags the state (s, c) fixes the
    number of empty slots r - s - c, and the next tag lands in an empty slot
    (s + 1, c), a singleton (s - 1, c + 1) or an already collided slot (s, c).
    """
    _check_sizes(n, r)

    s_idx = np.arange(r + 1)[:, None]
    c_idx = np.arange(r + 1)[None, :]
    empties = r - s_idx - c_idx
    to_empty = np.where(empties >= 0, empties / r, 0.0)
    to_single = np.broadcast_to(s_idx / r, (r + 1, r + 1))
    to_collided = np.broadcast_to(c_idx / r, (r + 1, r + 1))

    prob = np.zeros((r + 1, r + 1))
    prob[0, 0] = 1.0
    for _ in range(n):
        hit_empty = prob * to_empty
        hit_single = prob * to_single
        nxt = prob * to_collided
        nxt[1:, :] += hit_empty[:-1, :]
        nxt[:-1, 1:] += hit_single[1:, :-1]
        prob = nxt

    mass: Dict[Outcome, float] = {}
    for s, c in zip(*np.nonzero(prob > MASS_FLOOR)):
        mass[(int(s), int(c))] = float(prob[s, c])
    return OccupancyDistribution(n, r, mass)


def brute_force_counts(n: int, r: int) -> Dict[Outcome, int]:
    """
    Count the r**n equiprobable slot assignments by their (successes, collisions).

    Returns:
        Dictionary mapping (s, c) -> number of assignments with that outcome
    """
    _check_sizes(n, r)
    total = r**n
    if total > MAX_ENUMERATION:
        raise ValueError(
            f"{r}**{n} = {total} assignments exceeds the enumeration bound {MAX_ENUMERATION}"
        )

    counts: Dict[Outcome, int] = {}
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        rows = np.arange(codes.size)
        occupancy = np.zeros((codes.size, r), dtype=np.int16)
        # Each base-r digit of the code is one tag's slot
        for _ in range(n):
            codes, slot = np.divmod(codes, r)
            occupancy[rows, slot] += 1

        successes = (occupancy == 1).sum(axis=1)
        collisions = (occupancy >= 2).sum(axis=1)
        keys, hits = np.unique(successes * (r + 1) + collisions, return_counts=True)
        for key, hit in zip(keys, hits):
            outcome = (int(key) // (r + 1), int(key) % (r + 1))
            counts[outcome] = counts.get(outcome, 0) + int(hit)

    return counts


def brute_force_distribution(n: int, r: int) -> OccupancyDistribution:
    """Oracle distribution from exhaustive enumeration, divided once at the end."""
    counts = brute_force_counts(n, r)
    total = r**n
    return OccupancyDistribution(n, r, {k: v / total for k, v in counts.items()})


def slot_probabilities(K: float) -> Tuple[float, float, float]:
    """
    Poisson probabilities of an empty, successful and collided slot.

    Args:
        K: Average number of transmissions per slot

    Returns:
        Tuple of (p_empty, p_success, p_collision)
    """
    if not math.isfinite(K) or K < 0:
        raise ValueError(f"traffic must be finite and non-negative, got {K}")

    p_empty = math.exp(-K)
    p_success = K * p_empty
    p_collision = -math.expm1(-K) - p_success
    return p_empty, p_success, max(p_collision, 0.0)
