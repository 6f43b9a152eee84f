"""Exact and asymptotic performance analysis of frame-length rules."""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Set, Tuple

import numpy as np
from scipy import integrate, optimize

from constants import (
    E_INV,
    K_CONVERGED,
    MAX_EXACT_TAGS,
    POW2_ANALYTIC_REPORTED,
    POW2_SIMULATED_REPORTED,
    SCHOUTE_H,
)
from estimators import Estimator, round_half_up
from occupancy import joint_outcome_distribution, slot_probabilities


class ConvergenceError(RuntimeError):
    """An iteration hit its cap before reaching its stopping condition."""


@dataclass(frozen=True)
class PhaseBreakdown:
    """Per-tag slot cost of the approach (A) and convergence (B) phases, and the surviving backlog fraction (C)."""

    A: float
    B: float
    C: float
    efficiency: float


@dataclass(frozen=True)
class TrafficTrajectory:
    """Expected-value sequences of a traffic recursion, one entry per frame."""

    K: Tuple[float, ...]
    R: Tuple[float, ...]
    Z: Tuple[float, ...]
    N: Tuple[float, ...]
    Bratio: Tuple[float, ...]
    efficiency: float

    @property
    def slot_offsets(self) -> Tuple[float, ...]:
        """Expected slot index at which each frame starts."""
        return tuple(np.concatenate(([0.0], np.cumsum(self.R[:-1]))).tolist())


# ---------------------------------------------------------------------------
# Exact expected identification length


def _needed_frames(N: int, r0: int, rule: Estimator) -> Dict[int, Set[int]]:
    """Frame lengths r for which L(n, r) is needed, per backlog n >= 2."""
    needed: Dict[int, Set[int]] = {n: set() for n in range(2, N + 1)}
    needed[N].add(r0)

    for n in range(N, 1, -1):
        # Outcomes with no success keep the backlog and only change the frame
        frontier = list(needed[n])
        while frontier:
            r = frontier.pop()
            for s, c, _ in joint_outcome_distribution(n, r):
                if s == 0:
                    nxt = rule.next_frame(s, c, n)
                    if nxt not in needed[n]:
                        needed[n].add(nxt)
                        frontier.append(nxt)

        for r in needed[n]:
            for s, c, _ in joint_outcome_distribution(n, r):
                if s > 0 and n - s >= 2:
                    needed[n - s].add(rule.next_frame(s, c, n - s))

    return needed


def exact_expected_length(
    N: int, rule: Estimator, r0: int, n_max: int = MAX_EXACT_TAGS
) -> float:
    """
    Average number of slots to identify N tags starting with a frame of r0 slots
    (rounded to a power of two for power-of-two rules).

    For every backlog n the lengths {L(n, r)} are coupled through outcomes with
    no success, so each family is obtained by solving (I - M) L = b, where M
    holds the no-success transitions and b the frame cost plus the already
    known terms at smaller backlogs.
    """
    if N < 0:
        raise ValueError(f"tag count must be non-negative, got {N}")
    if r0 < 1:
        raise ValueError(f"initial frame length must be at least 1, got {r0}")
    if N > n_max:
        raise ValueError(f"exact evaluation is limited to N <= {n_max}, got {N}")
    if not rule.memoryless:
        raise ValueError(f"estimator {rule.label} is stateful; its exact length is not available")

    # Power-of-two rules round the first frame too
    _, start = rule.initial_frame(r0)
    if N <= 1:
        return float(start)

    needed = _needed_frames(N, start, rule)
    lengths: Dict[Tuple[int, int], float] = {}

    for n in range(2, N + 1):
        frames = sorted(needed[n])
        if not frames:
            continue
        index = {r: k for k, r in enumerate(frames)}
        coupling = np.zeros((len(frames), len(frames)))
        known = np.array(frames, dtype=float)

        for r in frames:
            row = index[r]
            for s, c, p in joint_outcome_distribution(n, r):
                if n - s < 2:
                    continue
                nxt = rule.next_frame(s, c, n - s)
                if s == 0:
                    coupling[row, index[nxt]] += p
                else:
                    known[row] += p * lengths[(n - s, nxt)]

        try:
            solution = np.linalg.solve(np.eye(len(frames)) - coupling, known)
        except np.linalg.LinAlgError as e:
            raise ConvergenceError(f"no finite expected length for n={n}: {e}") from e

        for r, value in zip(frames, solution):
            lengths[(n, r)] = float(value)

    return lengths[(N, start)]


# ---------------------------------------------------------------------------
# Traffic recursions


def schoute_map(K: float) -> float:
    """One step of the Schoute traffic recursion K_i -> K_{i+1}."""
    p_empty, _, p_collision = slot_probabilities(K)
    return K * (1.0 - p_empty) / (SCHOUTE_H * p_collision)


def ae2_map(K: float, B: float) -> float:
    """One step of the AE2 traffic recursion with the ideal multiplier for ratio B."""
    p_empty, _, p_collision = slot_probabilities(K)
    return K * (1.0 - 2.0 * E_INV) / (1.0 - B * E_INV) * (1.0 - B * p_empty) / p_collision


def map_derivative(fn: Callable[[float], float], K: float, h: float = 1e-6) -> float:
    """Central-difference derivative of a scalar map."""
    return (fn(K + h) - fn(K - h)) / (2.0 * h)


def schoute_traffic_recursion(
    K0: float, eps: float = 1e-10, max_iter: int = 100_000
) -> TrafficTrajectory:
    """
    Iterate the Schoute recursions from R_0 = 1, N_0 = K0 until N_i / N_0 < eps.

    Efficiency is K0 / sum(R_i), which depends on K0 = N / r only.
    """
    if not K0 > 0:
        raise ValueError(f"initial traffic must be positive, got {K0}")

    Ks: List[float] = []
    Rs: List[float] = []
    Ns: List[float] = []
    R, N, K = 1.0, float(K0), float(K0)

    for _ in range(max_iter):
        Ks.append(K)
        Rs.append(R)
        Ns.append(N)

        p_empty, _, p_collision = slot_probabilities(K)
        N = N * (1.0 - p_empty)
        R = SCHOUTE_H * R * p_collision
        if N / K0 < eps:
            break
        K = N / R
    else:
        raise ConvergenceError(f"Schoute recursion from K0={K0} did not finish in {max_iter} frames")

    return TrafficTrajectory(
        K=tuple(Ks),
        R=tuple(Rs),
        Z=tuple(Rs),
        N=tuple(Ns),
        Bratio=tuple(1.0 for _ in Rs),
        efficiency=K0 / math.fsum(Rs),
    )


def ae2_traffic_recursion(
    K0: float, r0: float = 1.0, b: float = 1.0, eps: float = 1e-10, max_iter: int = 100_000
) -> TrafficTrajectory:
    """
    Iterate the AE2 recursions with real frames R_i = min(round((i+1)**b), Z_i).

    Starts from Z_0 = r0 and N_0 = K0 * r0; stops when N_i / N_0 < eps.
    """
    if not K0 > 0:
        raise ValueError(f"initial traffic must be positive, got {K0}")
    if not b > 0:
        raise ValueError(f"exponent b must be positive, got {b}")
    if not r0 > 0:
        raise ValueError(f"initial frame must be positive, got {r0}")

    Ks: List[float] = []
    Rs: List[float] = []
    Zs: List[float] = []
    Ns: List[float] = []
    Bs: List[float] = []
    Z, N0 = float(r0), float(K0) * r0
    N = N0

    for i in range(max_iter):
        K = N / Z
        R = min(float(round_half_up((i + 1) ** b)), Z)
        B = R / Z
        Ks.append(K)
        Rs.append(R)
        Zs.append(Z)
        Ns.append(N)
        Bs.append(B)

        p_empty, _, p_collision = slot_probabilities(K)
        H_i = (1.0 - B * E_INV) / (1.0 - 2.0 * E_INV)
        N = N * (1.0 - B * p_empty)
        Z = Z * H_i * p_collision
        if N / N0 < eps:
            break
    else:
        raise ConvergenceError(f"AE2 recursion from K0={K0} did not finish in {max_iter} frames")

    return TrafficTrajectory(
        K=tuple(Ks),
        R=tuple(Rs),
        Z=tuple(Zs),
        N=tuple(Ns),
        Bratio=tuple(Bs),
        efficiency=N0 / math.fsum(Rs),
    )


def ktrace_grid(lo: float, hi: float, count: int) -> List[float]:
    """Log-spaced initial traffics in [lo, hi]."""
    if count < 1 or not 0 < lo <= hi:
        raise ValueError(f"invalid K grid [{lo}, {hi}] x {count}")
    return [float(k) for k in np.geomspace(lo, hi, count)]


def mean_ktrace_efficiency(lo: float = 500.0, count: int = 400) -> float:
    """Mean Schoute efficiency over one logarithmic period [lo, lo * H)."""
    grid = np.geomspace(lo, lo * SCHOUTE_H, count + 1)[:-1]
    return math.fsum(schoute_traffic_recursion(float(k)).efficiency for k in grid) / count


def phase_efficiency(
    K_u: float, tolerance: float = K_CONVERGED, max_iter: int = 10_000
) -> PhaseBreakdown:
    """
    Asymptotic efficiency 1 / (A + B + C e) of Schoute's estimate.

    The approach phase ends at traffic K_u, having cost H / ((H - 1) K_u) slots
    per tag. The convergence phase then follows the traffic recursion until K
    is within tolerance of one; the backlog left at that point is resolved at
    e slots per tag.
    """
    if K_u < 10:
        raise ValueError(f"K_u must be at least 10, got {K_u}")

    H = SCHOUTE_H
    A = H / ((H - 1.0) * K_u)

    # Frame and backlog sizes per initial tag
    R, n, K = 1.0 / K_u, 1.0, float(K_u)
    convergence: List[float] = []
    for _ in range(max_iter):
        p_empty, _, p_collision = slot_probabilities(K)
        R = H * R * p_collision
        n = n * (1.0 - p_empty)
        K = n / R
        if abs(K - 1.0) < tolerance:
            break
        convergence.append(R)
    else:
        raise ConvergenceError(f"traffic did not reach 1 from K_u={K_u}")

    B = math.fsum(convergence)
    C = n
    return PhaseBreakdown(A=A, B=B, C=C, efficiency=1.0 / (A + B + C * math.e))


# ---------------------------------------------------------------------------
# Approach-phase posterior traffic


def posterior_likelihood(s: float, width: int) -> float:
    """
    Probability of all-collided frames at traffics 2s, 4s, ... followed by a
    frame at traffic s holding at least one non-collided slot.
    """
    if width not in (1, 2):
        raise ValueError(f"frame width must be 1 or 2, got {width}")
    if not s > 0:
        raise ValueError(f"traffic must be positive, got {s}")

    likelihood = 1.0 - slot_probabilities(s)[2] ** width
    k = 1
    while True:
        p_collision = slot_probabilities(s * 2.0**k)[2]
        if 1.0 - p_collision < 1e-17 or k > 200:
            break
        likelihood *= p_collision**width
        k += 1
    return likelihood


def posterior_traffic(frame_width: int, resolution: float = 1e-3) -> float:
    """Traffic in (0, 10] maximizing the approach-phase stopping likelihood."""
    if frame_width not in (1, 2):
        raise ValueError(f"frame width must be 1 or 2, got {frame_width}")

    grid = np.arange(resolution, 10.0 + resolution / 2, resolution)
    values = np.array([posterior_likelihood(float(s), frame_width) for s in grid])
    best = int(np.argmax(values))

    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, grid.size - 1)])
    polished = optimize.minimize_scalar(
        lambda s: -posterior_likelihood(s, frame_width),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": resolution / 10},
    )
    return float(polished.x) if polished.success else float(grid[best])


# ---------------------------------------------------------------------------
# Power-of-two frames


@dataclass(frozen=True)
class Pow2Asymptote:
    """Average of exp(-s) over the tags-per-slot law of nearest power-of-two frames."""

    quadrature: float
    closed_form: float
    reported: float
    simulated_reported: float

    @property
    def discrepancy(self) -> float:
        return self.quadrature - self.reported


def _pow2_traffic_density(s: float) -> float:
    # Half the mass uniform on [3/4, 1], half uniform on [1, 3/2]
    if 0.75 <= s < 1.0:
        return 0.5 / 0.25
    if 1.0 <= s <= 1.5:
        return 0.5 / 0.5
    return 0.0


def pow2_asymptotic_efficiency() -> Pow2Asymptote:
    quadrature = math.fsum(
        integrate.quad(lambda s: math.exp(-s) * _pow2_traffic_density(s), lo, hi)[0]
        for lo, hi in ((0.75, 1.0), (1.0, 1.5))
    )
    closed_form = 2.0 * (math.exp(-0.75) - E_INV) + (E_INV - math.exp(-1.5))
    return Pow2Asymptote(
        quadrature=quadrature,
        closed_form=closed_form,
        reported=POW2_ANALYTIC_REPORTED.value,
        simulated_reported=POW2_SIMULATED_REPORTED.value,
    )


# ---------------------------------------------------------------------------
# Rounding in the pure-collision phase


@dataclass(frozen=True)
class RoundingBounds:
    lower: float
    ratio: float
    upper: float


def rounding_ratio_bounds(r: int, horizon: int = 30) -> RoundingBounds:
    """
    Ratio of collision-phase frame sums with and without rounding, and its bracket.

    Raises:
        ArithmeticError: if the ratio falls outside 1 +/- 1 / (r (H - 1))
    """
    if r < 1 or horizon < 1:
        raise ValueError(f"need r >= 1 and horizon >= 1, got r={r}, horizon={horizon}")

    rounded: List[int] = [r]
    exact: List[float] = [float(r)]
    for _ in range(horizon - 1):
        rounded.append(round_half_up(SCHOUTE_H * rounded[-1]))
        exact.append(SCHOUTE_H * exact[-1])

    ratio = math.fsum(rounded) / math.fsum(exact)
    width = 1.0 / (r * (SCHOUTE_H - 1.0))
    bounds = RoundingBounds(lower=1.0 - width, ratio=ratio, upper=1.0 + width)
    if not bounds.lower < ratio < bounds.upper:
        raise ArithmeticError(f"rounding ratio {ratio} outside {bounds}")
    return bounds
