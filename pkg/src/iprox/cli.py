"""``iprox`` command-line front end.

Exit codes: 0 success, 1 some run did not converge, 2 configuration error
(bad tolerance, malformed flag or config file, infeasible start),
3 problem-definition fault (unknown problem, evaluator returned NaN,
failed validation), 4 output directory not writable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import (
    BARRIERS,
    EvaluationFault,
    FeasibilityError,
    InnerParams,
    OuterParams,
    get_barrier,
)
from .diagnostics import cluster_limit_points
from .experiment import parse_protocol, reproduce_rosenbrock, run_starts, write_run
from .artifacts import write_json
from .problems import UnknownProblem, get_problem, list_problems

__all__ = ["RunConfig", "ConfigError", "main", "build_parser", "load_config"]

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG = 2
EXIT_PROBLEM = 3
EXIT_OUTPUT = 4

DEFAULT_OUT_DIR = "iprox-out"

_OUTER_KEYS = ("eps_p", "eps_d", "eps0", "mu0", "theta_eps", "theta_mu", "max_outer_iters")
_INNER_KEYS = ("gamma0", "alpha", "beta", "max_inner_iters")
_CONFIG_KEYS = set(_OUTER_KEYS + _INNER_KEYS) | {
    "problem", "x0", "protocol", "barrier", "out_dir", "jobs", "trace_format"
}


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    pass


@dataclass
class RunConfig:
    problem: str = "rosenbrock"
    x0: Optional[List[float]] = None
    protocol: Optional[str] = None
    outer: OuterParams = field(default_factory=OuterParams)
    inner: InnerParams = field(default_factory=InnerParams)
    barrier: str = "reciprocal"
    out_dir: str = DEFAULT_OUT_DIR
    trace_format: str = "csv"
    jobs: int = 1

    def starts(self, spec):
        if self.x0 is not None and self.protocol is not None:
            raise ConfigError("give either --x0 or --protocol, not both")
        if self.protocol is not None:
            try:
                pts = parse_protocol(self.protocol)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if spec.n != 2:
                raise ConfigError("the circle protocol needs a two-dimensional problem")
            return pts
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float)
            if x0.size != spec.n:
                raise ConfigError(f"x0 has {x0.size} entries, problem {spec.name!r} has n={spec.n}")
            return [x0]
        if spec.x0 is None:
            raise ConfigError(f"problem {spec.name!r} has no default start; pass --x0")
        return [np.asarray(spec.x0, dtype=float)]


def parse_x0(text):
    if isinstance(text, (list, tuple)):
        vals = list(text)
    else:
        vals = [s for s in str(text).split(",") if s.strip()]
    try:
        return [float(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse x0 {text!r} (expected comma-separated reals)") from None


def load_config(path):
    """Read a JSON config file (flat object; keys as the long flags, either
    ``eps-p`` or ``eps_p`` spelling)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        out[k] = value
    return out


def resolve_config(args) -> RunConfig:
    """Merge defaults, the config file and flags (flags win)."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(load_config(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        outer = OuterParams(**{k: merged[k] for k in _OUTER_KEYS if k in merged})
        inner = InnerParams(**{k: merged[k] for k in _INNER_KEYS if k in merged})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameter: {exc}") from None
    barrier = merged.get("barrier", "reciprocal")
    if barrier not in BARRIERS:
        raise ConfigError(f"unknown barrier {barrier!r}; choose from {sorted(BARRIERS)}")
    jobs = merged.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("jobs must be a positive integer")
    fmt = merged.get("trace_format", "csv")
    if fmt not in ("csv", "none"):
        raise ConfigError("trace format must be 'csv' or 'none'")
    out_dir = merged.get("out_dir") or os.environ.get("IPROX_OUT_DIR") or DEFAULT_OUT_DIR
    return RunConfig(
        problem=str(merged.get("problem", "rosenbrock")),
        x0=parse_x0(merged["x0"]) if merged.get("x0") is not None else None,
        protocol=merged.get("protocol"),
        outer=outer,
        inner=inner,
        barrier=barrier,
        out_dir=out_dir,
        trace_format=fmt,
        jobs=jobs,
    )


def ensure_writable(directory):
    try:
        os.makedirs(directory, exist_ok=True)
        probe = os.path.join(directory, ".iprox-write-probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise OutputError(f"output directory {directory!r} is not writable: {exc}") from None


def _write_outputs(directory, spec, x0, result, config):
    if config.trace_format == "csv":
        return write_run(directory, spec, x0, result, config.outer)
    from .artifacts import run_summary

    summary = run_summary(spec, x0, result, config.outer)
    write_json(os.path.join(directory, "summary.json"), summary)
    return summary


def cmd_solve(config: RunConfig, out=None):
    out = out or sys.stdout
    spec = get_problem(config.problem)
    barrier = get_barrier(config.barrier)
    starts = config.starts(spec)
    ensure_writable(config.out_dir)
    results = run_starts(spec, barrier, starts, config.outer, config.inner, jobs=config.jobs)
    if len(starts) == 1:
        _write_outputs(config.out_dir, spec, starts[0], results[0], config)
        r = results[0]
        print(
            f"{spec.name}: {r.status} x*={np.array2string(r.x, precision=6)} "
            f"outer={r.outer_iterations} grad_evals={r.grad_evals}",
            file=out,
        )
    else:
        summaries = []
        for i, (x0, r) in enumerate(zip(starts, results)):
            summaries.append(
                _write_outputs(os.path.join(config.out_dir, f"run_{i:02d}"), spec, x0, r, config)
            )
            print(f"run {i:02d}: {r.status} x*={np.array2string(r.x, precision=6)}", file=out)
        clusters = cluster_limit_points([r.x for r in results], radius=1e-3)
        write_json(
            os.path.join(config.out_dir, "summary.json"),
            {
                "problem": spec.name,
                "runs": summaries,
                "clusters": [{"center": c, "members": m} for c, m in clusters],
            },
        )
        for c, m in clusters:
            print(f"cluster {np.array2string(c, precision=4)}: {len(m)} run(s)", file=out)
    return EXIT_OK if all(r.converged for r in results) else EXIT_NOT_CONVERGED


def cmd_reproduce_rosenbrock(config: RunConfig, count=20, out=None):
    out = out or sys.stdout
    ensure_writable(config.out_dir)
    rep = reproduce_rosenbrock(
        config.out_dir, count=count, outer=config.outer, inner=config.inner, jobs=config.jobs
    )
    for label, n in rep.basin_counts().items():
        print(f"basin {label}: {n} run(s)", file=out)
    for label, res in rep.trace_runs.items():
        print(
            f"trace start for {label}: {res.status} x*={np.array2string(res.x, precision=6)} "
            f"grad_evals={res.grad_evals}",
            file=out,
        )
    print(f"artifacts written to {config.out_dir}", file=out)
    return EXIT_OK if rep.all_converged else EXIT_NOT_CONVERGED


def cmd_validate(problem, barrier_name="reciprocal", out=None):
    out = out or sys.stdout
    from .checks import validate_problem

    spec = get_problem(problem)
    report = validate_problem(spec, get_barrier(barrier_name))
    for check in report.checks:
        print(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}", file=out)
    return EXIT_OK if report.passed else EXIT_PROBLEM


def cmd_list_problems(out=None):
    out = out or sys.stdout
    for name in list_problems():
        print(name, file=out)
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default $IPROX_OUT_DIR or ./iprox-out)")
    for flag, dest in [
        ("--eps-p", "eps_p"),
        ("--eps-d", "eps_d"),
        ("--mu0", "mu0"),
        ("--eps0", "eps0"),
        ("--theta-mu", "theta_mu"),
        ("--theta-eps", "theta_eps"),
        ("--gamma0", "gamma0"),
        ("--alpha", "alpha"),
        ("--beta", "beta"),
    ]:
        p.add_argument(flag, dest=dest, type=float)
    p.add_argument("--max-outer-iters", dest="max_outer_iters", type=int)
    p.add_argument("--max-inner-iters", dest="max_inner_iters", type=int)
    p.add_argument("--jobs", type=int, help="concurrent runs for multi-start protocols")


def build_parser():
    parser = argparse.ArgumentParser(prog="iprox", description="Interior-point proximal gradient solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a registered problem")
    p.add_argument("--problem")
    p.add_argument("--x0", help="comma-separated starting point (use --x0=-1,2 for a leading minus)")
    p.add_argument("--protocol", help="multi-start protocol, e.g. circle:20")
    p.add_argument("--barrier", choices=sorted(BARRIERS))
    p.add_argument("--trace-format", dest="trace_format", choices=["csv", "none"])
    _add_solver_flags(p)

    p = sub.add_parser("reproduce-rosenbrock", help="run the 20-start Rosenbrock experiment")
    p.add_argument("--count", type=int, default=20, help="number of circle starts")
    _add_solver_flags(p)

    p = sub.add_parser("validate", help="derivative, prox and barrier checks")
    p.add_argument("name", nargs="?", help="problem name")
    p.add_argument("--problem")
    p.add_argument("--barrier", choices=sorted(BARRIERS), default="reciprocal")

    sub.add_parser("list-problems", help="print registered problem names")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list-problems":
            return cmd_list_problems()
        if args.command == "validate":
            name = args.name or args.problem
            if not name:
                raise ConfigError("validate needs a problem name")
            return cmd_validate(name, args.barrier)
        config = resolve_config(args)
        if args.command == "solve":
            return cmd_solve(config)
        if args.count < 1:
            raise ConfigError("--count must be positive")
        return cmd_reproduce_rosenbrock(config, count=args.count)
    except UnknownProblem as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_PROBLEM
    except EvaluationFault as exc:
        print(f"error: problem evaluation fault: {exc}", file=sys.stderr)
        return EXIT_PROBLEM
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except (ConfigError, FeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
