import math
from dataclasses import replace

import pytest

from analytic import exact_expected_length
from constants import DEFAULT_N_GRID
from estimators import estimator_names, parse_estimator
from sim import (
    SimConfig,
    batch_efficiency,
    collision_count_variance,
    mean_trajectory,
    run_batch,
    run_identification,
)

SCHOUTE = parse_estimator("schoute")


def test_empty_population():
    result = run_identification(SimConfig(0, SCHOUTE, r0=4))
    assert result.frames == 0
    assert result.total_slots == 0
    assert result.efficiency == 1.0
    assert result.terminated


@pytest.mark.parametrize("name", ["schoute", "lower_bound", "perfect", "ae2", "ae2_opt"])
def test_single_tag_single_slot(name):
    result = run_identification(SimConfig(1, parse_estimator(name), r0=1))
    assert result.total_slots == 1
    assert result.efficiency == 1.0


@pytest.mark.parametrize("name", estimator_names())
def test_every_estimator_terminates(name):
    config = SimConfig(300, parse_estimator(name), r0=1, seed=7, runs=5)
    for result in run_batch(config):
        assert result.terminated
        assert result.total_slots >= 300
        assert 0 < result.efficiency <= 1


def test_reproducible():
    config = SimConfig(150, parse_estimator("ae2_opt"), r0=1, seed=42, runs=10)
    assert run_batch(config) == run_batch(config)
    assert batch_efficiency(config) == batch_efficiency(config)


def test_runs_differ_by_index():
    config = SimConfig(150, SCHOUTE, r0=1, seed=42)
    slots = {run_identification(config, i).total_slots for i in range(10)}
    assert len(slots) > 1


def test_workers_do_not_change_results():
    config = SimConfig(60, SCHOUTE, r0=8, seed=3, runs=8)
    assert run_batch(config, workers=2) == run_batch(config, workers=1)


@pytest.mark.parametrize("name", ["schoute", "ae2(b=2)", "ae2_opt", "ae2_pow2", "perfect"])
def test_slot_accounting(name):
    config = SimConfig(120, parse_estimator(name), r0=3, seed=11)
    result = run_identification(config, record=True)
    points = result.trajectory

    assert sum(p.successes for p in points) == 120
    assert sum(p.real_len for p in points) == result.total_slots
    assert len(points) == result.frames
    backlog = 120
    for p in points:
        assert p.backlog_before == backlog
        assert p.empties + p.successes + p.collisions == p.real_len
        assert 1 <= p.real_len <= p.virtual_len
        backlog -= p.successes
    assert backlog == 0


def test_frame_cap_reports_non_termination():
    config = SimConfig(50, SCHOUTE, r0=1, max_frames=1, runs=3)
    result = run_identification(config)
    assert not result.terminated
    assert result.frames == 1
    assert batch_efficiency(config).non_terminating == 3


def test_batch_needs_two_runs():
    with pytest.raises(ValueError):
        batch_efficiency(SimConfig(10, SCHOUTE, runs=1))


@pytest.mark.parametrize(
    "kwargs", [{"n_tags": -1}, {"n_tags": 5, "r0": 0}, {"n_tags": 5, "runs": 0}]
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(estimator=SCHOUTE, **kwargs)


def test_two_tags_two_slots():
    point = batch_efficiency(SimConfig(2, SCHOUTE, r0=2, seed=1, runs=5000))
    assert point.mean_slots == pytest.approx(4.0, abs=4 * point.slots_stderr)


def test_collision_count_variance_bounded():
    mean, variance = collision_count_variance(200, 200, draws=500, seed=5)
    assert mean == pytest.approx(200 * 0.2642, rel=0.05)
    assert 0 < variance <= 200


def test_mean_trajectory_shape():
    config = SimConfig(200, SCHOUTE, r0=1, seed=9, runs=100)
    mean = mean_trajectory(config)
    assert mean.active_runs[0] == 100
    assert all(a >= b for a, b in zip(mean.active_runs, mean.active_runs[1:]))
    assert mean.estimate[0] == 1.0
    assert all(ratio == 1.0 for ratio in mean.ratio)
    assert mean.slot_offsets[0] == 0.0

    with pytest.raises(ValueError):
        mean_trajectory(replace(config, runs=10))


@pytest.mark.slow
@pytest.mark.parametrize("name", ["schoute", "schoute_pow2", "lower_bound", "perfect"])
@pytest.mark.parametrize("n", [2, 3, 5, 8, 10])
def test_simulation_matches_exact_length(name, n):
    rule = parse_estimator(name)
    for r0 in (1, n, 2 * n):
        exact = exact_expected_length(n, rule, r0)
        point = batch_efficiency(SimConfig(n, rule, r0=r0, seed=n * 100 + r0, runs=3000))
        assert point.mean_slots == pytest.approx(exact, abs=4 * point.slots_stderr), r0


@pytest.mark.slow
def test_schoute_finite_population():
    from_one = batch_efficiency(SimConfig(1000, SCHOUTE, r0=1, seed=1, runs=200))
    assert from_one.mean_efficiency == pytest.approx(0.311, abs=0.01)

    from_n = batch_efficiency(SimConfig(1000, SCHOUTE, r0=1000, seed=1, runs=200))
    assert from_n.mean_efficiency >= 0.355


@pytest.mark.slow
def test_perfect_estimate_band():
    # Frames of exactly n slots succeed with probability (1 - 1/n)**(n - 1) per slot,
    # slightly above 1/e, and small backlogs near the end push the mean further up
    point = batch_efficiency(SimConfig(1000, parse_estimator("perfect"), r0=1000, seed=2, runs=200))
    assert (1 - 1 / 1000) ** 999 > math.exp(-1)
    assert 0.354 <= point.mean_efficiency <= 0.372


@pytest.mark.slow
def test_optimized_ae2_above_035():
    estimator = parse_estimator("ae2_opt")
    for n in DEFAULT_N_GRID:
        if not 10 <= n <= 10_000:
            continue
        runs = 400 if n <= 1000 else 60
        point = batch_efficiency(SimConfig(n, estimator, r0=1, seed=3, runs=runs))
        assert point.mean_efficiency > 0.35, n
        if n == 10_000:
            assert point.mean_efficiency >= 0.36


@pytest.mark.slow
def test_pow2_frames_large_population():
    point = batch_efficiency(SimConfig(10_000, parse_estimator("ae2_pow2"), r0=1, seed=4, runs=60))
    assert point.mean_efficiency == pytest.approx(0.357, abs=0.005)


@pytest.mark.slow
def test_smallest_real_frame_growth_is_best():
    efficiency = {
        b: batch_efficiency(
            SimConfig(1000, parse_estimator(f"ae2(b={b})"), r0=1, seed=6, runs=300)
        ).mean_efficiency
        for b in (1, 2, 3)
    }
    assert efficiency[1] > efficiency[3]
    assert efficiency[1] >= efficiency[2] - 0.005


@pytest.mark.slow
def test_ae2_overshoot_higher_and_sooner_than_schoute():
    schoute = mean_trajectory(SimConfig(1000, SCHOUTE, r0=1, seed=8, runs=200))
    ae2 = mean_trajectory(SimConfig(1000, parse_estimator("ae2(b=2)"), r0=1, seed=8, runs=200))

    schoute_peak = max(range(len(schoute.estimate)), key=schoute.estimate.__getitem__)
    ae2_peak = max(range(len(ae2.estimate)), key=ae2.estimate.__getitem__)
    assert ae2.estimate[ae2_peak] > schoute.estimate[schoute_peak]
    assert ae2.slot_offsets[ae2_peak] < schoute.slot_offsets[schoute_peak]
