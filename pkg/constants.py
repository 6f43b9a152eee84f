"""Shared constants for backlog estimation experiments."""

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple, TypeAlias

E_INV: float = math.exp(-1.0)

# Expected number of tags in a collided slot when traffic is one tag per slot
SCHOUTE_H: float = (1.0 - E_INV) / (1.0 - 2.0 * E_INV)

# AE2 multiplier limit when the real frame is a vanishing fraction of the virtual one
H_PRIME: float = 1.0 / (1.0 - 2.0 * E_INV)

# Approach-phase multipliers of the optimized AE2 variant, followed by TAIL_MULTIPLIER
OPTIMIZED_MULTIPLIERS: Tuple[float, ...] = (2.0, 2.0, 2.0, 2.0, 1.8, 1.7)
TAIL_MULTIPLIER: float = 1.7

# Frame lengths allowed by the standard are 2**Q with Q in this range
POW2_MIN_EXPONENT: int = 1
POW2_MAX_EXPONENT: int = 16

# Exact evaluation of the expected identification length is limited to small populations
MAX_EXACT_TAGS: int = 30

# Largest r**n the brute-force occupancy oracle will enumerate
MAX_ENUMERATION: int = 17_000_000

# Masses below this are dropped from occupancy supports
MASS_FLOOR: float = 1e-300

KTolerance: TypeAlias = float
K_CONVERGED: KTolerance = 1e-6

DEFAULT_N_GRID: List[int] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000]
DEFAULT_RUNS: int = 2000
DEFAULT_SEED: int = 20130101
DEFAULT_MAX_FRAMES: int = 10**6
MIN_TRAJECTORY_RUNS: int = 100
Z_95: float = 1.959963984540054

# Multiplier search space
SEARCH_RANGE: Tuple[float, float] = (1.5, 2.5)
SEARCH_STEP: float = 0.1
SEARCH_LENGTH: int = 12
SEARCH_N_GRID: List[int] = [10, 20, 50, 100, 200, 500, 1000]


@dataclass(frozen=True)
class ReportedValue:
    """A figure quoted in the literature, kept next to what we compute."""

    label: str
    value: float


# K_u -> asymptotic efficiency of Schoute's estimate
TABLE1_REPORTED: Dict[float, ReportedValue] = {
    20.0: ReportedValue("K_u=20", 0.31125),
    25.0: ReportedValue("K_u=25", 0.31127),
    30.0: ReportedValue("K_u=30", 0.31125),
    35.0: ReportedValue("K_u=35", 0.31122),
    40.0: ReportedValue("K_u=40", 0.31122),
    45.0: ReportedValue("K_u=45", 0.31123),
    47.8: ReportedValue("K_u=47.8", 0.31125),
}

SCHOUTE_ASYMPTOTE = ReportedValue("Schoute asymptotic efficiency", 0.311)
POW2_ANALYTIC_REPORTED = ReportedValue("power-of-two frame efficiency (averaging argument)", 0.3562)
POW2_SIMULATED_REPORTED = ReportedValue("power-of-two frame efficiency (simulation)", 0.357)
POSTERIOR_REPORTED: Dict[int, ReportedValue] = {
    1: ReportedValue("posterior traffic, one-slot frames", 1.4),
    2: ReportedValue("posterior traffic, two-slot frames", 1.85),
}
