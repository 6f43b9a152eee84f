"""Experiment specifications: JSON config files merged with command-line flags."""

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from constants import DEFAULT_N_GRID, DEFAULT_RUNS, DEFAULT_SEED, MIN_TRAJECTORY_RUNS
from estimators import Estimator, parse_estimator

R0Token = Union[int, str]  # an explicit length, or "N" for r0 = N


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a subcommand needs to reproduce one table or figure."""

    command: str
    estimators: Tuple[str, ...] = ("schoute",)
    n_list: Tuple[int, ...] = tuple(DEFAULT_N_GRID)
    k_list: Tuple[float, ...] = ()
    r0: Tuple[R0Token, ...] = (1,)
    b: Optional[float] = None
    runs: int = DEFAULT_RUNS
    seed: int = DEFAULT_SEED
    workers: int = 1
    out: Optional[str] = None
    restarts: int = 0
    max_evaluations: Optional[int] = None
    timing: bool = False

    def __post_init__(self) -> None:
        if not self.n_list:
            raise ValueError("the N list must not be empty")
        if any(n < 0 for n in self.n_list):
            raise ValueError(f"tag counts must be non-negative: {self.n_list}")
        if not self.r0:
            raise ValueError("at least one initial frame length is required")
        for token in self.r0:
            if token != "N" and not (isinstance(token, int) and token >= 1):
                raise ValueError(f"r0 must be a positive integer or 'N', got {token!r}")
        if self.runs < 1:
            raise ValueError(f"runs must be positive, got {self.runs}")
        if self.command == "trajectory" and self.runs < MIN_TRAJECTORY_RUNS:
            raise ValueError(
                f"trajectory averages need at least {MIN_TRAJECTORY_RUNS} runs, got {self.runs}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")
        # Fails early on unknown names
        self.resolved_estimators()

    def resolved_estimators(self) -> Tuple[Estimator, ...]:
        resolved = []
        for text in self.estimators:
            if self.b is not None and text.strip() == "ae2":
                text = f"ae2(b={self.b})"
            resolved.append(parse_estimator(text))
        return tuple(resolved)

    def initial_frames(self, n_tags: int) -> Tuple[int, ...]:
        """Concrete r0 values for a population, deduplicated in spec order."""
        frames = []
        for token in self.r0:
            value = max(n_tags, 1) if token == "N" else int(token)
            if value not in frames:
                frames.append(value)
        return tuple(frames)


def parse_int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(item) for item in text.split(",") if item.strip())


def parse_float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in text.split(",") if item.strip())


def parse_r0_list(text: str) -> Tuple[R0Token, ...]:
    tokens = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        tokens.append("N" if item.upper() == "N" else int(item))
    return tuple(tokens)


def _coerce(name: str, value: Any) -> Any:
    if name in ("estimators", "n_list", "k_list", "r0"):
        if isinstance(value, (str, int, float)):
            value = [value]
        if name == "r0":
            return tuple("N" if str(v).upper() == "N" else int(v) for v in value)
        if name == "n_list":
            return tuple(int(v) for v in value)
        if name == "k_list":
            return tuple(float(v) for v in value)
        return tuple(str(v) for v in value)
    return value


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON object whose keys mirror ExperimentSpec fields."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must hold a JSON object")

    known = {f.name for f in fields(ExperimentSpec)} - {"command"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return {name: _coerce(name, value) for name, value in data.items()}


def build_spec(
    command: str,
    config: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> ExperimentSpec:
    """Merge command defaults, config-file values and flag overrides, in that order."""
    merged: Dict[str, Any] = dict(defaults or {})
    merged.update(config or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentSpec(command=command, **merged)
