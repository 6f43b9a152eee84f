"""Seeded Monte Carlo simulation of Dynamic Frame Aloha with Frame Restart."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from constants import DEFAULT_MAX_FRAMES, MIN_TRAJECTORY_RUNS, Z_95
from estimators import Estimator, FrameObservation


@dataclass(frozen=True)
class SimConfig:
    """One simulated experiment: population, estimator, initial frame and seed."""

    n_tags: int
    estimator: Estimator
    r0: int = 1
    seed: int = 0
    max_frames: int = DEFAULT_MAX_FRAMES
    runs: int = 1

    def __post_init__(self) -> None:
        if self.n_tags < 0:
            raise ValueError(f"tag population must be non-negative, got {self.n_tags}")
        if self.r0 < 1:
            raise ValueError(f"initial frame length must be at least 1, got {self.r0}")
        if self.max_frames < 1:
            raise ValueError(f"max_frames must be at least 1, got {self.max_frames}")
        if self.runs < 1:
            raise ValueError(f"runs must be at least 1, got {self.runs}")


@dataclass(frozen=True)
class TrajectoryPoint:
    frame_index: int
    virtual_len: int
    real_len: int
    empties: int
    successes: int
    collisions: int
    backlog_before: int
    estimate_before: int
    estimate_after: int


@dataclass(frozen=True)
class RunResult:
    n_tags: int
    total_slots: int
    frames: int
    efficiency: float
    terminated: bool = True
    trajectory: Optional[Tuple[TrajectoryPoint, ...]] = field(default=None, repr=False)


@dataclass(frozen=True)
class EfficiencyPoint:
    """Batch summary of one (N, estimator, r0) grid point."""

    n_tags: int
    estimator: str
    r0: int
    mean_efficiency: float
    ci_half_width: float
    runs: int
    seed: int
    mean_slots: float
    slots_stderr: float
    non_terminating: int = 0


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    """Independent generator for one replica, derived from (master seed, run index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run_index,)))


def run_identification(
    config: SimConfig, run_index: int = 0, record: bool = False
) -> RunResult:
    """
    Identify all tags of one population.

    Each frame every backlogged tag draws a slot of the virtual frame; only the
    real prefix is executed, and the whole real frame is counted even if the
    last tag is identified before its end.
    """
    rng = run_rng(config.seed, run_index)
    estimator = config.estimator
    state = estimator.initial_state(config.r0)
    virtual, real = estimator.initial_frame(config.r0)

    backlog = config.n_tags
    total_slots = 0
    frames = 0
    trajectory: List[TrajectoryPoint] = []

    while backlog > 0:
        if frames >= config.max_frames:
            break

        draws = rng.integers(0, virtual, size=backlog)
        occupancy = np.bincount(draws[draws < real], minlength=real)
        successes = int(np.count_nonzero(occupancy == 1))
        collisions = int(np.count_nonzero(occupancy >= 2))
        obs = FrameObservation(
            empties=real - successes - collisions,
            successes=successes,
            collisions=collisions,
            real_len=real,
            virtual_len=virtual,
        )

        backlog_before = backlog
        backlog -= successes
        total_slots += real
        decision = estimator.decide(state, obs, backlog)

        if record:
            trajectory.append(
                TrajectoryPoint(
                    frame_index=frames,
                    virtual_len=virtual,
                    real_len=real,
                    empties=obs.empties,
                    successes=successes,
                    collisions=collisions,
                    backlog_before=backlog_before,
                    estimate_before=state.estimate,
                    estimate_after=decision.estimate,
                )
            )

        state = state.advanced(decision)
        virtual, real = decision.next_virtual, decision.next_real
        frames += 1

    if config.n_tags == 0:
        efficiency = 1.0
    else:
        efficiency = config.n_tags / total_slots

    return RunResult(
        n_tags=config.n_tags,
        total_slots=total_slots,
        frames=frames,
        efficiency=efficiency,
        terminated=backlog == 0,
        trajectory=tuple(trajectory) if record else None,
    )


def _run_block(config: SimConfig, start: int, stop: int, record: bool) -> List[RunResult]:
    return [run_identification(config, i, record) for i in range(start, stop)]


def run_batch(
    config: SimConfig, workers: int = 1, record: bool = False
) -> List[RunResult]:
    """All replicas of a config, in run-index order."""
    if workers <= 1 or config.runs < 2 * workers:
        return _run_block(config, 0, config.runs, record)

    step = math.ceil(config.runs / workers)
    bounds = [(lo, min(lo + step, config.runs)) for lo in range(0, config.runs, step)]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        blocks = executor.map(
            _run_block,
            [config] * len(bounds),
            [lo for lo, _ in bounds],
            [hi for _, hi in bounds],
            [record] * len(bounds),
        )
        return [result for block in blocks for result in block]


def _mean_and_stderr(values: Sequence[float]) -> Tuple[float, float]:
    count = len(values)
    mean = math.fsum(values) / count
    variance = math.fsum((v - mean) ** 2 for v in values) / (count - 1)
    return mean, math.sqrt(variance / count)


def batch_efficiency(config: SimConfig, workers: int = 1) -> EfficiencyPoint:
    """Mean per-run efficiency with a 95% normal-approximation half-width."""
    if config.runs < 2:
        raise ValueError(f"a batch needs at least 2 runs, got {config.runs}")

    results = run_batch(config, workers)
    mean_eff, eff_stderr = _mean_and_stderr([r.efficiency for r in results])
    mean_slots, slots_stderr = _mean_and_stderr([float(r.total_slots) for r in results])

    return EfficiencyPoint(
        n_tags=config.n_tags,
        estimator=config.estimator.label,
        r0=config.r0,
        mean_efficiency=mean_eff,
        ci_half_width=Z_95 * eff_stderr,
        runs=config.runs,
        seed=config.seed,
        mean_slots=mean_slots,
        slots_stderr=slots_stderr,
        non_terminating=sum(1 for r in results if not r.terminated),
    )


@dataclass(frozen=True)
class MeanTrajectory:
    """Frame-indexed ensemble averages over the runs still active at each frame."""

    estimate: Tuple[float, ...]
    traffic: Tuple[float, ...]
    ratio: Tuple[float, ...]
    backlog: Tuple[float, ...]
    real_len: Tuple[float, ...]
    active_runs: Tuple[int, ...]

    @property
    def slot_offsets(self) -> Tuple[float, ...]:
        return tuple(np.concatenate(([0.0], np.cumsum(self.real_len[:-1]))).tolist())


def mean_trajectory(
    config: SimConfig, workers: int = 1, min_runs: int = MIN_TRAJECTORY_RUNS
) -> MeanTrajectory:
    """Average estimate, traffic n_i / z_i and real/virtual ratio per frame index."""
    if config.runs < min_runs:
        raise ValueError(f"trajectory averages need at least {min_runs} runs, got {config.runs}")

    columns: Dict[str, List[List[float]]] = {
        "estimate": [],
        "traffic": [],
        "ratio": [],
        "backlog": [],
        "real_len": [],
    }
    for result in run_batch(config, workers, record=True):
        for point in result.trajectory or ():
            i = point.frame_index
            if i == len(columns["estimate"]):
                for values in columns.values():
                    values.append([])
            columns["estimate"][i].append(point.estimate_before)
            columns["traffic"][i].append(point.backlog_before / point.virtual_len)
            columns["ratio"][i].append(point.real_len / point.virtual_len)
            columns["backlog"][i].append(point.backlog_before)
            columns["real_len"][i].append(point.real_len)

    def averaged(name: str) -> Tuple[float, ...]:
        return tuple(math.fsum(v) / len(v) for v in columns[name])

    return MeanTrajectory(
        estimate=averaged("estimate"),
        traffic=averaged("traffic"),
        ratio=averaged("ratio"),
        backlog=averaged("backlog"),
        real_len=averaged("real_len"),
        active_runs=tuple(len(v) for v in columns["estimate"]),
    )


def collision_count_variance(n: int, r: int, draws: int = 2000, seed: int = 0) -> Tuple[float, float]:
    """
    Empirical mean and variance of the collided-slot count for n tags in r slots.

    Returns:
        Tuple of (mean, variance)
    """
    if n < 0 or r < 1 or draws < 2:
        raise ValueError(f"invalid sample request n={n}, r={r}, draws={draws}")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    slots = rng.integers(0, r, size=(draws, n))
    occupancy = np.zeros((draws, r), dtype=np.int64)
    np.add.at(occupancy, (np.arange(draws)[:, None], slots), 1)
    collisions = (occupancy >= 2).sum(axis=1).astype(float)
    return float(collisions.mean()), float(collisions.var(ddof=1))
