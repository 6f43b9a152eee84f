"""Search for approach-phase multiplier sequences of the optimized AE2 estimator."""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from constants import (
    OPTIMIZED_MULTIPLIERS,
    SEARCH_LENGTH,
    SEARCH_RANGE,
    SEARCH_STEP,
    TAIL_MULTIPLIER,
)
from estimators import optimized_estimator
from sim import SimConfig, batch_efficiency

Multipliers = Tuple[float, ...]


@dataclass(frozen=True)
class SearchSpace:
    """Discretized multipliers in [low, high] with the given step, sequences of fixed length."""

    low: float = SEARCH_RANGE[0]
    high: float = SEARCH_RANGE[1]
    step: float = SEARCH_STEP
    length: int = SEARCH_LENGTH
    tail: float = TAIL_MULTIPLIER

    def values(self) -> Tuple[float, ...]:
        count = int(round((self.high - self.low) / self.step)) + 1
        return tuple(round(self.low + k * self.step, 10) for k in range(count))

    def snap(self, multiplier: float) -> float:
        return min(self.values(), key=lambda v: abs(v - multiplier))

    def baseline(self) -> Multipliers:
        """The published sequence, padded with its tail to the searched length."""
        padded = list(OPTIMIZED_MULTIPLIERS[: self.length])
        padded += [TAIL_MULTIPLIER] * (self.length - len(padded))
        return tuple(self.snap(m) for m in padded)


@dataclass(frozen=True)
class SearchReport:
    best_sequence: Multipliers
    best_min_efficiency: float
    per_n_best: Dict[int, float]
    baseline_sequence: Multipliers
    baseline_min_efficiency: float
    per_n_baseline: Dict[int, float]
    baseline_ci: Dict[int, float]
    n_grid: Tuple[int, ...]
    runs_per_point: int
    seed: int
    space: SearchSpace
    evaluations: int
    budget_exhausted: bool


class _Objective:
    """Minimum efficiency over the N grid, with common random numbers across candidates."""

    def __init__(
        self,
        n_grid: Sequence[int],
        runs: int,
        seed: int,
        tail: float,
        r0: int,
        workers: int,
        max_evaluations: Optional[int],
    ) -> None:
        self.n_grid = tuple(n_grid)
        self.runs = runs
        self.seed = seed
        self.tail = tail
        self.r0 = r0
        self.workers = workers
        self.max_evaluations = max_evaluations
        self.cache: Dict[Multipliers, Dict[int, Tuple[float, float]]] = {}

    @property
    def exhausted(self) -> bool:
        return self.max_evaluations is not None and len(self.cache) >= self.max_evaluations

    def per_n(self, sequence: Multipliers) -> Dict[int, Tuple[float, float]]:
        if sequence not in self.cache:
            estimator = optimized_estimator(sequence, self.tail)
            points = {}
            for n in self.n_grid:
                config = SimConfig(n, estimator, r0=self.r0, seed=self.seed, runs=self.runs)
                point = batch_efficiency(config, self.workers)
                points[n] = (point.mean_efficiency, point.ci_half_width)
            self.cache[sequence] = points
        return self.cache[sequence]

    def __call__(self, sequence: Multipliers) -> float:
        return min(eff for eff, _ in self.per_n(sequence).values())


def h_sequence_search(
    space: SearchSpace,
    n_grid: Sequence[int],
    runs_per_point: int,
    seed: int,
    restarts: int = 0,
    max_sweeps: int = 3,
    max_evaluations: Optional[int] = None,
    r0: int = 1,
    workers: int = 1,
    progress: Optional[Callable[[str], None]] = None,
) -> SearchReport:
    """
    Coordinate ascent on the multiplier sequence maximizing the worst efficiency over N.

    The first start is the published sequence; further restarts begin from
    random sequences drawn with the master seed. Every candidate is simulated
    with the same seed so differences between candidates are not sampling noise.
    """
    if not n_grid:
        raise ValueError("the N grid must not be empty")
    if runs_per_point < 2:
        raise ValueError(f"need at least 2 runs per point, got {runs_per_point}")

    objective = _Objective(n_grid, runs_per_point, seed, space.tail, r0, workers, max_evaluations)
    values = space.values()
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,)))

    baseline = space.baseline()
    starts: List[Multipliers] = [baseline]
    for _ in range(restarts):
        starts.append(tuple(float(v) for v in rng.choice(values, size=space.length)))

    best, best_score = baseline, objective(baseline)
    for start in starts:
        if start is not baseline and objective.exhausted:
            break
        current, score = start, objective(start)
        for sweep in range(max_sweeps):
            improved = False
            for position in range(space.length):
                for value in values:
                    if objective.exhausted:
                        break
                    if value == current[position]:
                        continue
                    candidate = current[:position] + (value,) + current[position + 1 :]
                    candidate_score = objective(candidate)
                    if candidate_score > score:
                        current, score, improved = candidate, candidate_score, True
            if progress:
                progress(f"sweep {sweep + 1}: min efficiency {score:.5f} for {current}")
            if not improved or objective.exhausted:
                break
        if score > best_score:
            best, best_score = current, score

    baseline_points = objective.per_n(baseline)
    return SearchReport(
        best_sequence=best,
        best_min_efficiency=best_score,
        per_n_best={n: eff for n, (eff, _) in objective.per_n(best).items()},
        baseline_sequence=baseline,
        baseline_min_efficiency=objective(baseline),
        per_n_baseline={n: eff for n, (eff, _) in baseline_points.items()},
        baseline_ci={n: ci for n, (_, ci) in baseline_points.items()},
        n_grid=tuple(n_grid),
        runs_per_point=runs_per_point,
        seed=seed,
        space=space,
        evaluations=len(objective.cache),
        budget_exhausted=objective.exhausted,
    )
