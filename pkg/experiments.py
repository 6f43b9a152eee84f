"""Subcommand implementations: reproduce tables and figure data as CSV or JSON."""

import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from analytic import (
    ae2_map,
    ae2_traffic_recursion,
    exact_expected_length,
    ktrace_grid,
    map_derivative,
    mean_ktrace_efficiency,
    phase_efficiency,
    posterior_traffic,
    pow2_asymptotic_efficiency,
    rounding_ratio_bounds,
    schoute_map,
    schoute_traffic_recursion,
)
from config import ExperimentSpec
from constants import (
    MAX_EXACT_TAGS,
    POSTERIOR_REPORTED,
    SCHOUTE_ASYMPTOTE,
    SCHOUTE_H,
    TABLE1_REPORTED,
)
from search import SearchSpace, h_sequence_search
from sim import SimConfig, batch_efficiency, mean_trajectory

TABLE1_COLUMNS = ["k_u", "efficiency", "reported"]
SWEEP_COLUMNS = [
    "n_tags",
    "estimator",
    "r0",
    "method",
    "efficiency",
    "ci_half_width",
    "runs",
    "seed",
    "non_terminating",
]
TRAJECTORY_COLUMNS = [
    "frame_index",
    "slot_offset",
    "mean_estimate",
    "descent_rate",
    "mean_traffic",
    "mean_ratio",
    "active_runs",
    "analytic_estimate",
    "relative_error_x1e3",
]
KTRACE_COLUMNS = ["k0", "efficiency", "frames"]

DEFAULT_K_RANGE = (1.0, 2000.0, 240)


def say(message: str) -> None:
    """Progress line on stderr, keeping stdout free for data."""
    print(message, file=sys.stderr)


def fmt(value: Any) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return "" if value is None else str(value)


@dataclass
class Output:
    """Rendered command output plus the count of runs that hit the frame cap."""

    text: str
    non_terminating: int = 0
    notes: List[str] = field(default_factory=list)


def render_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buffer.getvalue()


def render_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_output(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        say(f"Wrote {out}")
    else:
        sys.stdout.write(text)


def cmd_table1(spec: ExperimentSpec) -> Output:
    rows = []
    for k_u, reported in TABLE1_REPORTED.items():
        rows.append([k_u, phase_efficiency(k_u).efficiency, reported.value])
    return Output(render_csv(TABLE1_COLUMNS, rows))


def cmd_sweep(spec: ExperimentSpec) -> Output:
    """
    Efficiency versus N for every (estimator, r0) pair.

    Memoryless estimators with N <= 30 are evaluated exactly, the rest by simulation.
    """
    rows = []
    non_terminating = 0
    for estimator in spec.resolved_estimators():
        for n_tags in spec.n_list:
            for r0 in spec.initial_frames(n_tags):
                if estimator.memoryless and n_tags <= MAX_EXACT_TAGS:
                    length = exact_expected_length(n_tags, estimator, r0)
                    efficiency = n_tags / length if n_tags else 1.0
                    rows.append([n_tags, estimator.label, r0, "exact", efficiency, 0.0, 0, spec.seed, 0])
                    continue

                say(f"Simulating {estimator.label}: N={n_tags}, r0={r0} ({spec.runs} runs)")
                point = batch_efficiency(
                    SimConfig(n_tags, estimator, r0=r0, seed=spec.seed, runs=spec.runs),
                    workers=spec.workers,
                )
                if point.non_terminating:
                    say(f"  [!] {point.non_terminating} run(s) hit the frame cap")
                non_terminating += point.non_terminating
                rows.append(
                    [
                        n_tags,
                        point.estimator,
                        r0,
                        "simulation",
                        point.mean_efficiency,
                        point.ci_half_width,
                        point.runs,
                        point.seed,
                        point.non_terminating,
                    ]
                )
    return Output(render_csv(SWEEP_COLUMNS, rows), non_terminating)


def _analytic_estimates(name: str, b: float, n_tags: int, r0: int):
    if n_tags == 0:
        return None
    if name == "schoute":
        trajectory = schoute_traffic_recursion(n_tags / r0)
        return [r * r0 for r in trajectory.R]
    if name == "ae2":
        return list(ae2_traffic_recursion(n_tags / r0, r0=r0, b=b).Z)
    return None


def cmd_trajectory(spec: ExperimentSpec) -> Output:
    """Mean estimate, traffic and real/virtual ratio per frame, next to the analytic recursion."""
    estimator = spec.resolved_estimators()[0]
    n_tags = spec.n_list[0]
    r0 = spec.initial_frames(n_tags)[0]
    say(f"Averaging {spec.runs} runs of {estimator.label}: N={n_tags}, r0={r0}")
    config = SimConfig(n_tags, estimator, r0=r0, seed=spec.seed, runs=spec.runs)
    mean = mean_trajectory(config, workers=spec.workers)
    analytic = _analytic_estimates(estimator.name, estimator.exponent_b, n_tags, r0)

    rows = []
    offsets = mean.slot_offsets
    for i, estimate in enumerate(mean.estimate):
        descent = estimate / mean.estimate[i - 1] if i > 0 else None
        reference = analytic[i] if analytic is not None and i < len(analytic) else None
        error = None
        if reference is not None and estimate > 0:
            error = (estimate - reference) / estimate * 1e3
        rows.append(
            [
                i,
                offsets[i],
                estimate,
                descent,
                mean.traffic[i],
                mean.ratio[i],
                mean.active_runs[i],
                reference,
                error,
            ]
        )
    return Output(render_csv(TRAJECTORY_COLUMNS, rows))


def cmd_ktrace(spec: ExperimentSpec) -> Output:
    k_list = spec.k_list or tuple(ktrace_grid(*DEFAULT_K_RANGE))
    rows = []
    for k0 in k_list:
        trajectory = schoute_traffic_recursion(k0)
        rows.append([k0, trajectory.efficiency, len(trajectory.R)])
    return Output(render_csv(KTRACE_COLUMNS, rows))


def cmd_search(spec: ExperimentSpec) -> Output:
    space = SearchSpace()
    started = time.perf_counter()
    report = h_sequence_search(
        space,
        n_grid=spec.n_list,
        runs_per_point=spec.runs,
        seed=spec.seed,
        restarts=spec.restarts,
        max_evaluations=spec.max_evaluations,
        workers=spec.workers,
        progress=say,
    )
    payload: Dict[str, Any] = {
        "best_sequence": list(report.best_sequence),
        "best_min_efficiency": report.best_min_efficiency,
        "per_n_best": {str(n): v for n, v in report.per_n_best.items()},
        "baseline_sequence": list(report.baseline_sequence),
        "baseline_min_efficiency": report.baseline_min_efficiency,
        "per_n_baseline": {str(n): v for n, v in report.per_n_baseline.items()},
        "baseline_ci_half_width": {str(n): v for n, v in report.baseline_ci.items()},
        "n_grid": list(report.n_grid),
        "runs_per_point": report.runs_per_point,
        "step": space.step,
        "range": [space.low, space.high],
        "length": space.length,
        "tail": space.tail,
        "seed": report.seed,
        "evaluations": report.evaluations,
        "budget_exhausted": report.budget_exhausted,
    }
    if spec.timing:
        payload["wall_time_s"] = time.perf_counter() - started

    output = Output(render_json(payload))
    if report.budget_exhausted:
        output.notes.append(f"[!] evaluation budget of {spec.max_evaluations} exhausted")
    return output


def cmd_report(spec: ExperimentSpec) -> Output:
    """Closed-form and numerical checks that need no simulation."""
    pow2 = pow2_asymptotic_efficiency()
    stability = {}
    for B in (0.01, 0.1, 0.5, 1.0):
        stability[str(B)] = map_derivative(lambda K: ae2_map(K, B), 1.0)

    payload = {
        "posterior_traffic": {
            str(width): {"computed": posterior_traffic(width), "reported": reported.value}
            for width, reported in POSTERIOR_REPORTED.items()
        },
        "pow2_asymptote": {
            "quadrature": pow2.quadrature,
            "closed_form": pow2.closed_form,
            "reported": pow2.reported,
            "simulated_reported": pow2.simulated_reported,
            "discrepancy": pow2.discrepancy,
        },
        "rounding_bounds": {
            str(r): asdict(rounding_ratio_bounds(r)) for r in (1, 10, 100, 1000)
        },
        "stability": {
            "schoute_fixed_point": schoute_map(1.0),
            "schoute_derivative": map_derivative(schoute_map, 1.0),
            "ae2_derivative": stability,
        },
        "schoute_asymptote": {
            "mean_over_period": mean_ktrace_efficiency(),
            "period": [500.0, 500.0 * SCHOUTE_H],
            "reported": SCHOUTE_ASYMPTOTE.value,
        },
    }
    return Output(render_json(payload))


COMMANDS = {
    "table1": cmd_table1,
    "sweep": cmd_sweep,
    "trajectory": cmd_trajectory,
    "ktrace": cmd_ktrace,
    "search": cmd_search,
    "report": cmd_report,
}
