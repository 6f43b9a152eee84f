"""Backlog estimators for Dynamic Frame Aloha.

Every estimator follows the same contract: given its state and the observation
of the frame that just ended, emit the next virtual and real frame lengths.
State is a frozen value; ``EstimatorState.advanced`` produces the next one.
"""

import math
import re
from dataclasses import dataclass, replace
from enum import Enum, auto
from typing import Callable, Dict, Optional, Tuple

from constants import (
    E_INV,
    OPTIMIZED_MULTIPLIERS,
    POW2_MAX_EXPONENT,
    POW2_MIN_EXPONENT,
    SCHOUTE_H,
    TAIL_MULTIPLIER,
)


class Phase(Enum):
    """Regime of the optimized AE2 estimator."""

    APPROACH = auto()
    TRACKING = auto()


@dataclass(frozen=True)
class FrameObservation:
    """Slot outcomes over the executed (real) part of one frame."""

    empties: int
    successes: int
    collisions: int
    real_len: int
    virtual_len: int

    def __post_init__(self) -> None:
        if min(self.empties, self.successes, self.collisions) < 0:
            raise ValueError(f"slot counts must be non-negative: {self}")
        if self.real_len < 1:
            raise ValueError(f"real frame must have at least one slot: {self}")
        if self.empties + self.successes + self.collisions != self.real_len:
            raise ValueError(f"slot counts do not add up to the real frame length: {self}")
        if self.virtual_len < self.real_len:
            raise ValueError(f"virtual frame shorter than real frame: {self}")

    @property
    def non_collided(self) -> int:
        return self.empties + self.successes


@dataclass(frozen=True)
class EstimatorDecision:
    """Frame lengths for the next frame, plus the estimate behind them."""

    next_virtual: int
    next_real: int
    estimate: int
    done: bool = False
    phase: Phase = Phase.TRACKING

    def __post_init__(self) -> None:
        if self.next_real < 1 or self.next_real > self.next_virtual:
            raise ValueError(
                f"real frame {self.next_real} must lie in [1, {self.next_virtual}]"
            )


@dataclass(frozen=True)
class EstimatorState:
    """Reader-side memory carried from frame to frame."""

    frame_index: int
    estimate: int
    phase: Phase = Phase.TRACKING
    exponent_b: float = 1.0
    multipliers: Tuple[float, ...] = OPTIMIZED_MULTIPLIERS
    tail: float = TAIL_MULTIPLIER

    def __post_init__(self) -> None:
        if self.estimate < 0:
            raise ValueError(f"estimate must be non-negative, got {self.estimate}")
        if self.exponent_b <= 0:
            raise ValueError(f"exponent b must be positive, got {self.exponent_b}")

    def multiplier(self) -> float:
        """Approach-phase multiplier for the current frame index."""
        if self.frame_index < len(self.multipliers):
            return self.multipliers[self.frame_index]
        return self.tail

    def advanced(self, decision: EstimatorDecision) -> "EstimatorState":
        return replace(
            self,
            frame_index=self.frame_index + 1,
            estimate=decision.estimate,
            phase=decision.phase,
        )


def round_half_up(x: float) -> int:
    """Closest integer to x, halves away from zero."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _finished(estimate: int = 0) -> EstimatorDecision:
    return EstimatorDecision(1, 1, estimate, done=True)


def _full_frame(estimate: int, phase: Phase = Phase.TRACKING) -> EstimatorDecision:
    frame = max(estimate, 1)
    return EstimatorDecision(frame, frame, estimate, phase=phase)


def schoute_update(state: EstimatorState, obs: FrameObservation) -> EstimatorDecision:
    if obs.collisions == 0:
        return _finished()
    return _full_frame(round_half_up(SCHOUTE_H * obs.collisions))


def lower_bound_update(state: EstimatorState, obs: FrameObservation) -> EstimatorDecision:
    if obs.collisions == 0:
        return _finished()
    return _full_frame(2 * obs.collisions)


def ae2_multiplier(real_len: float, virtual_len: float) -> float:
    """Practical AE2 multiplier for a real/virtual frame ratio."""
    return (1.0 - (real_len / virtual_len) * E_INV) / (1.0 - 2.0 * E_INV)


def real_frame_length(frame_index: int, b: float, virtual_len: int) -> int:
    """Real frame growth law min(round((i + 1)**b), z_i)."""
    return max(min(round_half_up((frame_index + 1) ** b), virtual_len), 1)


def _ae2_estimate(state: EstimatorState, obs: FrameObservation) -> Tuple[int, bool]:
    """Next backlog estimate and whether the estimator considers the backlog gone."""
    if obs.collisions > 0:
        scaled = obs.virtual_len / obs.real_len * obs.collisions
        return round_half_up(ae2_multiplier(obs.real_len, obs.virtual_len) * scaled), False

    remaining = obs.virtual_len - obs.successes
    return max(remaining, 1), remaining <= 0


def ae2_update(state: EstimatorState, obs: FrameObservation) -> EstimatorDecision:
    estimate, done = _ae2_estimate(state, obs)
    if done:
        return _finished()
    next_real = real_frame_length(state.frame_index + 1, state.exponent_b, estimate)
    return EstimatorDecision(estimate, next_real, estimate)


def optimized_ae2_update(state: EstimatorState, obs: FrameObservation) -> EstimatorDecision:
    """
    AE2 with one-slot real frames and a tuned multiplier sequence while approaching.

    The approach phase ends at the first frame showing a non-collided slot;
    from there on the plain AE2 update takes over, real frames growing as
    min(round((i + 1)**b), z_i) with i still counted from the first frame.
    """
    if state.phase is Phase.APPROACH and obs.non_collided == 0:
        grown = max(round_half_up(state.multiplier() * state.estimate), state.estimate, 1)
        return EstimatorDecision(grown, 1, grown, phase=Phase.APPROACH)

    return ae2_update(state, obs)


def pow2_quantize(estimate: int) -> int:
    """Power of two 2**Q closest to the estimate, Q clamped to the allowed range."""
    if estimate < 1:
        raise ValueError(f"estimate must be at least 1, got {estimate}")

    low_q = min(max(estimate.bit_length() - 1, POW2_MIN_EXPONENT), POW2_MAX_EXPONENT)
    low = 1 << low_q
    high = 1 << min(low_q + 1, POW2_MAX_EXPONENT)
    if estimate <= low:
        return low
    # Ties go to the larger frame
    return high if high - estimate <= estimate - low else low


def ae2_pow2_update(state: EstimatorState, obs: FrameObservation) -> EstimatorDecision:
    """Optimized AE2 whose announced virtual frames are powers of two."""
    decision = optimized_ae2_update(state, obs)
    if decision.done:
        return decision

    virtual = pow2_quantize(max(decision.estimate, 1))
    real = 1 if decision.phase is Phase.APPROACH else min(decision.next_real, virtual)
    return EstimatorDecision(virtual, real, decision.estimate, phase=decision.phase)


def schoute_pow2_update(state: EstimatorState, obs: FrameObservation) -> EstimatorDecision:
    decision = schoute_update(state, obs)
    if decision.done:
        return decision
    frame = pow2_quantize(decision.next_virtual)
    return EstimatorDecision(frame, frame, decision.estimate)


def perfect_estimate(true_backlog: int) -> EstimatorDecision:
    """Benchmark decision that sizes the frame to the true backlog."""
    if true_backlog <= 0:
        return _finished()
    return _full_frame(true_backlog)


UpdateRule = Callable[[EstimatorState, FrameObservation], EstimatorDecision]


@dataclass(frozen=True)
class Estimator:
    """A named estimator: its update rule plus the parameters of its initial state."""

    name: str
    rule: Optional[UpdateRule]
    memoryless: bool
    exponent_b: float = 1.0
    multipliers: Tuple[float, ...] = OPTIMIZED_MULTIPLIERS
    tail: float = TAIL_MULTIPLIER
    uses_ground_truth: bool = False
    starts_approaching: bool = False
    power_of_two: bool = False

    @property
    def label(self) -> str:
        if self.name == "ae2":
            return f"ae2(b={self.exponent_b:g})"
        if self.name == "ae2_opt":
            params = []
            if self.multipliers != OPTIMIZED_MULTIPLIERS or self.tail != TAIL_MULTIPLIER:
                seq = "/".join(f"{m:g}" for m in self.multipliers)
                params += [f"seq={seq}", f"tail={self.tail:g}"]
            if self.exponent_b != 1.0:
                params.append(f"b={self.exponent_b:g}")
            return f"ae2_opt({','.join(params)})" if params else self.name
        return self.name

    def initial_state(self, r0: int) -> EstimatorState:
        if r0 < 1:
            raise ValueError(f"initial frame length must be at least 1, got {r0}")
        phase = Phase.APPROACH if self.starts_approaching else Phase.TRACKING
        return EstimatorState(
            frame_index=0,
            estimate=r0,
            phase=phase,
            exponent_b=self.exponent_b,
            multipliers=self.multipliers,
            tail=self.tail,
        )

    def initial_frame(self, r0: int) -> Tuple[int, int]:
        """(virtual, real) lengths of frame 0."""
        if self.power_of_two:
            virtual = pow2_quantize(r0)
            if self.memoryless:
                return virtual, virtual
            return virtual, min(r0, virtual)
        return r0, r0

    def decide(
        self, state: EstimatorState, obs: FrameObservation, backlog: int
    ) -> EstimatorDecision:
        """Next-frame decision; backlog is only consulted by the ground-truth benchmark."""
        if self.uses_ground_truth or self.rule is None:
            return perfect_estimate(backlog)
        return self.rule(state, obs)

    def next_frame(self, successes: int, collisions: int, backlog: int) -> int:
        """Frame-length map (s, c) -> r for memoryless estimators."""
        if not self.memoryless:
            raise ValueError(f"estimator {self.label} is stateful and has no frame map")
        decision = self.decide(_MEMORYLESS_STATE, _observation(successes, collisions), backlog)
        return decision.next_real


_MEMORYLESS_STATE = EstimatorState(frame_index=0, estimate=1)


def _observation(successes: int, collisions: int) -> FrameObservation:
    # Memoryless rules read only s and c; pad the frame with one empty slot
    frame = successes + collisions + 1
    return FrameObservation(1, successes, collisions, frame, frame)


_BUILDERS: Dict[str, Callable[[Dict[str, str]], Estimator]] = {}


def _register(name: str) -> Callable:
    def wrap(fn: Callable[[Dict[str, str]], Estimator]) -> Callable:
        _BUILDERS[name] = fn
        return fn

    return wrap


def _no_params(name: str, params: Dict[str, str]) -> None:
    if params:
        raise ValueError(f"estimator {name} takes no parameters, got {sorted(params)}")


@_register("schoute")
def _schoute(params: Dict[str, str]) -> Estimator:
    _no_params("schoute", params)
    return Estimator("schoute", schoute_update, memoryless=True)


@_register("lower_bound")
def _lower_bound(params: Dict[str, str]) -> Estimator:
    _no_params("lower_bound", params)
    return Estimator("lower_bound", lower_bound_update, memoryless=True)


@_register("schoute_pow2")
def _schoute_pow2(params: Dict[str, str]) -> Estimator:
    _no_params("schoute_pow2", params)
    return Estimator("schoute_pow2", schoute_pow2_update, memoryless=True, power_of_two=True)


@_register("perfect")
def _perfect(params: Dict[str, str]) -> Estimator:
    _no_params("perfect", params)
    return Estimator("perfect", None, memoryless=True, uses_ground_truth=True)


@_register("ae2")
def _ae2(params: Dict[str, str]) -> Estimator:
    unknown = set(params) - {"b"}
    if unknown:
        raise ValueError(f"estimator ae2 accepts only b, got {sorted(unknown)}")
    b = float(params.get("b", "1"))
    if not b > 0:
        raise ValueError(f"ae2 exponent b must be positive, got {b}")
    return Estimator("ae2", ae2_update, memoryless=False, exponent_b=b)


@_register("ae2_opt")
def _ae2_opt(params: Dict[str, str]) -> Estimator:
    unknown = set(params) - {"seq", "tail", "b"}
    if unknown:
        raise ValueError(f"estimator ae2_opt accepts seq, tail and b, got {sorted(unknown)}")
    seq = OPTIMIZED_MULTIPLIERS
    if "seq" in params:
        seq = tuple(float(m) for m in params["seq"].split("/") if m)
    tail = float(params.get("tail", TAIL_MULTIPLIER))
    if any(m < 1.0 for m in seq) or tail < 1.0:
        raise ValueError("approach multipliers must be at least 1")
    b = float(params.get("b", "1"))
    if not b > 0:
        raise ValueError(f"ae2_opt exponent b must be positive, got {b}")
    return optimized_estimator(seq, tail, b)


@_register("ae2_pow2")
def _ae2_pow2(params: Dict[str, str]) -> Estimator:
    _no_params("ae2_pow2", params)
    return Estimator(
        "ae2_pow2",
        ae2_pow2_update,
        memoryless=False,
        multipliers=(),
        tail=2.0,
        starts_approaching=True,
        power_of_two=True,
    )


def optimized_estimator(
    multipliers: Tuple[float, ...] = OPTIMIZED_MULTIPLIERS,
    tail: float = TAIL_MULTIPLIER,
    b: float = 1.0,
) -> Estimator:
    return Estimator(
        "ae2_opt",
        optimized_ae2_update,
        memoryless=False,
        exponent_b=b,
        multipliers=tuple(multipliers),
        tail=tail,
        starts_approaching=True,
    )


_SPEC_RE = re.compile(r"^\s*([a-z0-9_]+)\s*(?:\((.*)\))?\s*$")


def parse_estimator(text: str) -> Estimator:
    """
    Build an estimator from a spec string such as ``schoute``, ``ae2(b=2)`` or
    ``ae2_opt(seq=2/2/2/2/1.8/1.7,tail=1.7)``.
    """
    match = _SPEC_RE.match(text)
    if not match:
        raise ValueError(f"malformed estimator spec: {text!r}")

    name, arg_text = match.group(1), match.group(2)
    if name not in _BUILDERS:
        known = ", ".join(sorted(_BUILDERS))
        raise ValueError(f"unknown estimator {name!r} (known: {known})")

    params: Dict[str, str] = {}
    for item in filter(None, (arg_text or "").split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            # ae2(2) is shorthand for ae2(b=2)
            key, value = "b", key
        params[key.strip()] = value.strip()

    return _BUILDERS[name](params)


def estimator_names() -> Tuple[str, ...]:
    return tuple(sorted(_BUILDERS))
