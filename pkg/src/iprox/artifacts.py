"""CSV / JSON artifact writers.

All floats are written with 17 significant digits so files round-trip
exactly.  Schemas (column order is stable):

trace.csv       k,j,gamma,q_mu,inner_residual,primal_residual,eps_k,mu_k,grad_evals,prox_evals
trajectory.csv  k,j,x1..xn           (accepted inner iterates; start point not included)
outer.csv       k,mu_k,eps_k,inner_iterations,inner_residual,primal_residual,y_inf,
                grad_evals,prox_evals,q,x1..xn
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .core import TRACE_COLUMNS
from .diagnostics import build_kkt_report

__all__ = [
    "fmt",
    "write_trace_csv",
    "write_trajectory_csv",
    "write_outer_csv",
    "run_summary",
    "write_json",
]

OUTER_COLUMNS = (
    "k",
    "mu_k",
    "eps_k",
    "inner_iterations",
    "inner_residual",
    "primal_residual",
    "y_inf",
    "grad_evals",
    "prox_evals",
    "q",
)


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_table(path, header, template, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(template % row + "\n")


# integer-valued columns of the trace table
_TRACE_INT = {"k", "j", "grad_evals", "prox_evals"}
_G = "%.17g"


def write_trace_csv(path, trace):
    template = ",".join("%d" if c in _TRACE_INT else _G for c in TRACE_COLUMNS)
    rows = map(tuple, trace.columns().tolist())
    _write_table(path, TRACE_COLUMNS, template, rows)


def write_trajectory_csv(path, trace):
    cols = trace.columns()
    xs = trace.iterates()
    n = xs.shape[1] if xs.size else 0
    template = ",".join(["%d", "%d"] + [_G] * n)
    rows = (
        (int(c[0]), int(c[1]), *x) for c, x in zip(cols.tolist(), xs.tolist())
    )
    _write_table(path, ["k", "j"] + [f"x{i + 1}" for i in range(n)], template, rows)


def write_outer_csv(path, trace):
    n = trace.outer[0].x.size if trace.outer else 0
    rows = [
        [fmt(rec.k), fmt(rec.mu_k), fmt(rec.eps_k), fmt(rec.inner_iterations),
         fmt(rec.inner_residual), fmt(rec.primal_residual), fmt(rec.y_inf),
         fmt(rec.grad_evals), fmt(rec.prox_evals), fmt(rec.q_next)]
        + [fmt(v) for v in rec.x]
        for rec in trace.outer
    ]
    header = list(OUTER_COLUMNS) + [f"x{i + 1}" for i in range(n)]
    _write_table(path, header, "%s", (",".join(r) for r in rows))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return None if math.isnan(obj) else obj
    return obj


def run_summary(spec, x0, result, outer):
    """JSON-ready summary of one :class:`~iprox.outer.IPResult`."""
    pair = result.pair
    return {
        "problem": spec.name,
        "x0": list(np.asarray(x0, dtype=float)),
        "status": result.status,
        "inner_status": result.inner_status,
        "x_star": pair.x,
        "y_star": pair.y,
        "dual_residual": pair.dual_residual,
        "inner_residual": pair.inner_residual,
        "primal_residual": pair.primal_residual,
        "outer_iterations": result.outer_iterations,
        "grad_evals": result.grad_evals,
        "prox_evals": result.prox_evals,
        "q_start": result.q_start,
        "q_star": result.q_star,
        "kkt": build_kkt_report(pair, spec, outer).to_dict(),
    }


def write_json(path, payload):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=False)
        fh.write("\n")
