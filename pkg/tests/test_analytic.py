import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from analytic import (
    ae2_map,
    ae2_traffic_recursion,
    exact_expected_length,
    ktrace_grid,
    map_derivative,
    mean_ktrace_efficiency,
    phase_efficiency,
    posterior_likelihood,
    posterior_traffic,
    pow2_asymptotic_efficiency,
    rounding_ratio_bounds,
    schoute_map,
    schoute_traffic_recursion,
)
from constants import E_INV, H_PRIME, POSTERIOR_REPORTED, SCHOUTE_H, TABLE1_REPORTED
from estimators import parse_estimator

SCHOUTE = parse_estimator("schoute")
PERFECT = parse_estimator("perfect")


class TestExactExpectedLength:
    def test_trivial_populations(self):
        assert exact_expected_length(0, SCHOUTE, 5) == 5.0
        assert exact_expected_length(1, SCHOUTE, 5) == 5.0

    def test_two_tags(self):
        assert exact_expected_length(2, SCHOUTE, 2) == pytest.approx(4.0, abs=1e-12)
        assert exact_expected_length(2, SCHOUTE, 1) == pytest.approx(5.0, abs=1e-12)

    def test_perfect_two_tags(self):
        assert exact_expected_length(2, PERFECT, 2) == pytest.approx(4.0, abs=1e-12)
        assert exact_expected_length(3, PERFECT, 3) == pytest.approx(6.375, abs=1e-12)

    def test_power_of_two_rule_starts_from_rounded_frame(self):
        rule = parse_estimator("schoute_pow2")
        assert exact_expected_length(1, rule, 3) == 4.0
        assert exact_expected_length(2, rule, 1) == pytest.approx(4.0, abs=1e-12)
        assert exact_expected_length(2, rule, 1) == exact_expected_length(2, rule, 2)

    def test_perfect_rule_best_at_r0_equal_n(self):
        for n in range(2, 13):
            lengths = {r0: exact_expected_length(n, PERFECT, r0) for r0 in range(1, 2 * n + 1)}
            assert min(lengths, key=lengths.get) == n

    def test_rejects_stateful_and_large(self):
        with pytest.raises(ValueError):
            exact_expected_length(5, parse_estimator("ae2_opt"), 1)
        with pytest.raises(ValueError):
            exact_expected_length(31, SCHOUTE, 1)
        with pytest.raises(ValueError):
            exact_expected_length(5, SCHOUTE, 0)

    def test_length_at_least_population(self):
        for n in (2, 5, 10, 20):
            for r0 in (1, n, 3 * n):
                assert exact_expected_length(n, SCHOUTE, r0) >= n


class TestTrafficRecursions:
    def test_schoute_fixed_point(self):
        assert schoute_map(1.0) == pytest.approx(1.0, abs=1e-12)
        assert abs(map_derivative(schoute_map, 1.0)) < 1

    @pytest.mark.parametrize("B", [0.01, 0.1, 0.5, 1.0])
    def test_ae2_map_stable_at_one(self, B):
        assert ae2_map(1.0, B) == pytest.approx(1.0, abs=1e-12)
        assert abs(map_derivative(lambda K: ae2_map(K, B), 1.0)) < 1

    def test_unit_traffic_gives_inverse_e(self):
        trajectory = schoute_traffic_recursion(1.0)
        assert trajectory.efficiency == pytest.approx(E_INV, abs=1e-6)
        assert all(k == pytest.approx(1.0, abs=1e-9) for k in trajectory.K)

    def test_large_traffic_shrinks_by_h(self):
        trajectory = schoute_traffic_recursion(1e6)
        for i in range(3):
            assert trajectory.K[i + 1] / trajectory.K[i] == pytest.approx(1 / SCHOUTE_H, rel=1e-6)

    def test_ten_lies_between_asymptote_and_optimum(self):
        assert 0.311 < schoute_traffic_recursion(10.0).efficiency < E_INV

    def test_slot_offsets(self):
        trajectory = schoute_traffic_recursion(50.0)
        offsets = trajectory.slot_offsets
        assert offsets[0] == 0.0
        assert offsets[-1] == pytest.approx(math.fsum(trajectory.R[:-1]))

    @settings(max_examples=30, deadline=None)
    @given(K0=st.floats(0.05, 5000.0))
    def test_efficiency_bounded_by_inverse_e(self, K0):
        assert 0 < schoute_traffic_recursion(K0).efficiency <= E_INV + 1e-9

    def test_ae2_unit_traffic_holds(self):
        trajectory = ae2_traffic_recursion(1.0, r0=1, b=1)
        assert all(k == pytest.approx(1.0, abs=1e-9) for k in trajectory.K)

    def test_ae2_pure_collision_growth(self):
        trajectory = ae2_traffic_recursion(1e9, r0=1, b=1)
        assert trajectory.Z[11] / trajectory.Z[10] == pytest.approx(H_PRIME, rel=1e-3)

    def test_ae2_ratio_dips_near_unit_traffic(self):
        trajectory = ae2_traffic_recursion(1000.0, r0=1, b=2)
        B = np.array(trajectory.Bratio)
        lowest = int(np.argmin(B))
        reaches_one = next(i for i, k in enumerate(trajectory.K) if k < 1.5)
        assert abs(lowest - reaches_one) <= 2
        assert B[lowest + 1] > B[lowest]

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            schoute_traffic_recursion(0.0)
        with pytest.raises(ValueError):
            ae2_traffic_recursion(10.0, b=0)


def test_ktrace_grid():
    grid = ktrace_grid(1.0, 1000.0, 4)
    assert grid == pytest.approx([1.0, 10.0, 100.0, 1000.0])
    with pytest.raises(ValueError):
        ktrace_grid(10.0, 1.0, 5)


def test_schoute_asymptote_mean():
    assert mean_ktrace_efficiency() == pytest.approx(0.311, abs=1e-3)


class TestPhaseEfficiency:
    @pytest.mark.parametrize("k_u", sorted(TABLE1_REPORTED))
    def test_reproduces_table(self, k_u):
        assert phase_efficiency(k_u).efficiency == pytest.approx(
            TABLE1_REPORTED[k_u].value, abs=2e-4
        )

    def test_breakdown_adds_up(self):
        result = phase_efficiency(30.0)
        assert result.A == pytest.approx(SCHOUTE_H / ((SCHOUTE_H - 1) * 30.0))
        assert 1 / (result.A + result.B + result.C * math.e) == pytest.approx(result.efficiency)
        assert 0 < result.C < 1

    @pytest.mark.parametrize("k_u", [15.0, 22.0, 31.5, 40.0])
    def test_shift_by_h_leaves_efficiency(self, k_u):
        assert phase_efficiency(k_u * SCHOUTE_H).efficiency == pytest.approx(
            phase_efficiency(k_u).efficiency, abs=1e-3
        )

    def test_small_k_u_rejected(self):
        with pytest.raises(ValueError):
            phase_efficiency(5.0)


class TestPosterior:
    @pytest.mark.parametrize("width", [1, 2])
    def test_matches_reported(self, width):
        assert posterior_traffic(width) == pytest.approx(POSTERIOR_REPORTED[width].value, abs=0.05)

    def test_likelihood_peak(self):
        peak = posterior_likelihood(1.4, 1)
        assert peak > posterior_likelihood(1.0, 1)
        assert peak > posterior_likelihood(1.8, 1)

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError):
            posterior_likelihood(1.0, 3)
        with pytest.raises(ValueError):
            posterior_traffic(0)


def test_pow2_asymptote():
    result = pow2_asymptotic_efficiency()
    assert result.quadrature == pytest.approx(result.closed_form, abs=1e-10)
    assert result.closed_form == pytest.approx(0.35372, abs=1e-4)
    assert result.reported == 0.3562
    assert result.discrepancy == pytest.approx(result.quadrature - 0.3562)


class TestRoundingBounds:
    @pytest.mark.parametrize("r", [1, 2, 10, 100, 1000])
    def test_ratio_inside_bracket(self, r):
        bounds = rounding_ratio_bounds(r)
        assert bounds.lower < bounds.ratio < bounds.upper

    def test_unit_frame_width(self):
        bounds = rounding_ratio_bounds(1)
        assert bounds.upper - bounds.lower == pytest.approx(2 / (SCHOUTE_H - 1), abs=1e-12)
        assert bounds.upper - bounds.lower == pytest.approx(1.437, abs=1e-3)

    def test_ratio_tends_to_one(self):
        assert abs(rounding_ratio_bounds(1000).ratio - 1) < abs(rounding_ratio_bounds(1).ratio - 1)

    def test_rejects_bad_frame(self):
        with pytest.raises(ValueError):
            rounding_ratio_bounds(0)
