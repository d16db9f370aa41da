"""Multi-start runs and the Rosenbrock reproduction pipeline."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .artifacts import (
    fmt,
    run_summary,
    write_json,
    write_outer_csv,
    write_trace_csv,
    write_trajectory_csv,
)
from .core import InnerParams, OuterParams, reciprocal_barrier
from .diagnostics import assign_basin, cluster_limit_points
from .outer import IPResult, ip_solve
from .problems import (
    TRACE_STARTS,
    ROSENBROCK_MINIMIZERS,
    circle_angles,
    circle_starting_points,
    rosenbrock_instance,
)

__all__ = ["parse_protocol", "run_starts", "write_run", "ReproductionResult", "reproduce_rosenbrock"]


def parse_protocol(protocol):
    """Starting points of a named protocol; only ``circle:<N>`` exists."""
    kind, _, arg = str(protocol).partition(":")
    if kind != "circle":
        raise ValueError(f"unknown protocol {protocol!r} (expected 'circle:<N>')")
    try:
        count = int(arg) if arg else 20
    except ValueError:
        raise ValueError(f"bad run count in protocol {protocol!r}") from None
    if count < 1:
        raise ValueError("protocol run count must be positive")
    return circle_starting_points(count)


def run_starts(
    spec,
    barrier,
    starts: Sequence,
    outer: OuterParams = OuterParams(),
    inner: InnerParams = InnerParams(),
    jobs: int = 1,
    accel: Optional[bool] = None,
) -> List[IPResult]:
    """Solve from every start; results are returned in start order."""

    def one(x0):
        return ip_solve(spec, barrier, x0, outer, inner, accel=accel)

    if jobs <= 1 or len(starts) <= 1:
        return [one(x0) for x0 in starts]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, starts))


def write_run(directory, spec, x0, result, outer):
    """trace.csv, trajectory.csv, outer.csv and summary.json for one run."""
    write_trace_csv(os.path.join(directory, "trace.csv"), result.trace)
    write_trajectory_csv(os.path.join(directory, "trajectory.csv"), result.trace)
    write_outer_csv(os.path.join(directory, "outer.csv"), result.trace)
    summary = run_summary(spec, x0, result, outer)
    write_json(os.path.join(directory, "summary.json"), summary)
    return summary


@dataclass
class ReproductionResult:
    out_dir: str
    starts: List[np.ndarray]
    results: List[IPResult]
    basins: List[Optional[str]]
    trace_runs: Dict[str, IPResult] = field(default_factory=dict)

    @property
    def all_converged(self):
        runs = list(self.results) + list(self.trace_runs.values())
        return all(r.converged for r in runs)

    def basin_counts(self):
        counts = {label: 0 for label in ROSENBROCK_MINIMIZERS}
        for b in self.basins:
            if b is not None:
                counts[b] += 1
        return counts


def _write_basins(path, angles, starts, results, basins):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "theta", "x0_1", "x0_2", "status", "x1", "x2", "y", "basin", "distance"])
        for i, (t, x0, res, b) in enumerate(zip(angles, starts, results, basins)):
            ref = ROSENBROCK_MINIMIZERS.get(b)
            dist = float(np.linalg.norm(res.x - np.asarray(ref))) if ref else float("nan")
            w.writerow(
                [i, fmt(t), fmt(x0[0]), fmt(x0[1]), res.status, fmt(res.x[0]), fmt(res.x[1]),
                 fmt(res.y[0]), b or "none", fmt(dist)]
            )


def reproduce_rosenbrock(
    out_dir,
    count: int = 20,
    outer: OuterParams = OuterParams(),
    inner: InnerParams = InnerParams(),
    jobs: int = 1,
    accel: Optional[bool] = None,
) -> ReproductionResult:
    """Run the circle protocol plus the two residual-trace starts and write
    every artifact under ``out_dir``.

    Layout::

        runs/run_XX/{trace,trajectory,outer}.csv, summary.json
        trace_<label>/{trace,trajectory,outer}.csv, summary.json
        basins.csv, summary.json
    """
    spec = rosenbrock_instance()
    barrier = reciprocal_barrier()
    starts = circle_starting_points(count)
    extra = [np.asarray(x0, dtype=float) for x0 in TRACE_STARTS.values()]
    results = run_starts(spec, barrier, starts + extra, outer, inner, jobs=jobs, accel=accel)
    circle, trace_res = results[:count], results[count:]
    basins = [assign_basin(r.x, ROSENBROCK_MINIMIZERS) for r in circle]

    os.makedirs(out_dir, exist_ok=True)
    summaries = []
    for i, (x0, res) in enumerate(zip(starts, circle)):
        s = write_run(os.path.join(out_dir, "runs", f"run_{i:02d}"), spec, x0, res, outer)
        s["basin"] = basins[i]
        summaries.append(s)
    trace_runs = {}
    trace_summaries = {}
    for (label, x0), res in zip(TRACE_STARTS.items(), trace_res):
        trace_runs[label] = res
        s = write_run(os.path.join(out_dir, f"trace_{label}"), spec, x0, res, outer)
        s["expected_basin"] = label
        s["basin"] = assign_basin(res.x, ROSENBROCK_MINIMIZERS)
        trace_summaries[label] = s
    _write_basins(os.path.join(out_dir, "basins.csv"), circle_angles(count), starts, circle, basins)

    out = ReproductionResult(out_dir, starts, circle, basins, trace_runs)
    clusters = cluster_limit_points([r.x for r in circle], radius=1e-3)
    write_json(
        os.path.join(out_dir, "summary.json"),
        {
            "problem": spec.name,
            "runs": summaries,
            "trace_runs": trace_summaries,
            "basin_counts": out.basin_counts(),
            "clusters": [{"center": c, "members": m} for c, m in clusters],
            "all_converged": out.all_converged,
        },
    )
    return out
