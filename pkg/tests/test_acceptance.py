"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]`` / ``[FAIL]`` line (outside pytest's
output capture) before asserting.  Run with::

    pytest tests/test_acceptance.py -v
"""

import csv
import filecmp
import math
import os
import time

import numpy as np
import pytest

from iprox.checks import check_derivatives
from iprox.core import InnerParams, OuterParams, reciprocal_barrier
from iprox.diagnostics import assign_basin, build_kkt_report
from iprox.experiment import reproduce_rosenbrock
from iprox.outer import ip_solve
from iprox.problems import (
    TRACE_STARTS,
    ROSENBROCK_MINIMIZERS,
    circle_starting_points,
    get_problem,
    quadratic_box_data,
    quadratic_box_instance,
    rosenbrock_instance,
)
from iprox.prox import (
    box_term,
    brute_force_prox_1d,
    half_quasinorm_term,
    l1_term,
    prox_box_indicator,
    prox_half_quasinorm,
    prox_l1,
)

from _oracles import qp_active_set_oracle

SLACK = 1e-12
# gradient evaluations of the two residual-trace runs, frozen from this implementation
LOCKED_GRAD_EVALS = {"x2": 12758, "x3": 12795}


def report(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}")
    assert ok, detail


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], [list(map(float, r)) for r in rows[1:]]


@pytest.fixture(scope="module")
def reproduction(tmp_path_factory):
    out = tmp_path_factory.mktemp("reproduce_a")
    return reproduce_rosenbrock(str(out))


QBOX_CASES = [(1 + i % 4, i) for i in range(20)]


@pytest.fixture(scope="module")
def qbox_runs():
    barrier = reciprocal_barrier()
    out = []
    for n, seed in QBOX_CASES:
        spec = quadratic_box_instance(n, seed)
        out.append((spec, ip_solve(spec, barrier, np.array(spec.x0), OuterParams())))
    return out


# 1 -------------------------------------------------------------------------


def test_criterion_1_basins(capsys):
    spec, barrier = rosenbrock_instance(), reciprocal_barrier()
    outer = OuterParams()
    t0 = time.perf_counter()
    results = [ip_solve(spec, barrier, x0, outer, InnerParams()) for x0 in circle_starting_points(20)]
    elapsed = time.perf_counter() - t0
    labels = [assign_basin(r.x, ROSENBROCK_MINIMIZERS, tol=1e-2) for r in results]
    certified = [r.converged and build_kkt_report(r.pair, spec, outer).certified for r in results]
    counts = {k: labels.count(k) for k in ROSENBROCK_MINIMIZERS}
    ok = all(certified) and None not in labels and all(counts.values()) and elapsed < 10.0
    report(
        capsys, "1 (20-start basins)", ok,
        f"certified {sum(certified)}/20, basins {counts}, unassigned {labels.count(None)}, "
        f"{elapsed:.2f} s",
    )


# 2 -------------------------------------------------------------------------


@pytest.mark.parametrize("label", list(TRACE_STARTS))
def test_criterion_2ab_residual_traces(capsys, reproduction, label):
    base = os.path.join(reproduction.out_dir, f"trace_{label}")
    head, outer_rows = read_csv(os.path.join(base, "outer.csv"))
    col = {name: i for i, name in enumerate(head)}
    eps = [r[col["eps_k"]] for r in outer_rows]
    stair = all(r[col["inner_residual"]] <= r[col["eps_k"]] for r in outer_rows)
    stair = stair and all(b <= a for a, b in zip(eps, eps[1:]))
    head_t, trace_rows = read_csv(os.path.join(base, "trace.csv"))
    tcol = {name: i for i, name in enumerate(head_t)}
    # trace's eps_k column (the reported dual residual) is nonincreasing
    dual = [r[tcol["eps_k"]] for r in trace_rows]
    stair = stair and all(b <= a for a, b in zip(dual, dual[1:]))
    final_primal = outer_rows[-1][col["primal_residual"]]
    ok = stair and final_primal <= 1e-5
    report(
        capsys, f"2(a,b) x0={TRACE_STARTS[label]}", ok,
        f"inner residual <= eps_k at all {len(outer_rows)} outer boundaries: {stair}; "
        f"final primal residual {final_primal:.3e}",
    )


@pytest.mark.parametrize("label", list(TRACE_STARTS))
def test_criterion_2c_limit_points(capsys, reproduction, label):
    res = reproduction.trace_runs[label]
    ref = np.asarray(ROSENBROCK_MINIMIZERS[label])
    dist = float(np.linalg.norm(res.x - ref))
    found = assign_basin(res.x, ROSENBROCK_MINIMIZERS)
    ok = res.converged and dist <= 1e-2
    report(
        capsys, f"2(c) x0={TRACE_STARTS[label]} -> {label}", ok,
        f"limit ({res.x[0]:.5f}, {res.x[1]:.5f}) is {dist:.3e} from {label}; nearest reported "
        f"point: {found}",
    )


def test_criterion_2_locked_counts(capsys, reproduction):
    got = {label: reproduction.trace_runs[label].grad_evals for label in TRACE_STARTS}
    ok = got == LOCKED_GRAD_EVALS
    report(capsys, "2 (gradient-evaluation counts)", ok, f"{got} vs locked {LOCKED_GRAD_EVALS}")


# 3 -------------------------------------------------------------------------


def _invariant_violations(spec, res, inner):
    bad = []
    trace = res.trace
    for block, rec in zip(trace.blocks, res.history):
        table = np.asarray(block.table)
        if len(table):
            gamma, q, step = table[:, 0], table[:, 1], table[:, 4]
            q_prev = np.concatenate([[rec.qmu_prev], q[:-1]])
            gamma_prev = np.concatenate([[inner.gamma0], gamma[:-1]])
            bound = q_prev - (1 - inner.alpha) / (2 * gamma) * step**2
            for j in np.flatnonzero(~(q <= bound + SLACK * np.maximum(1.0, np.abs(bound)))):
                bad.append(f"k={block.k} j={j}: sufficient decrease")
            for j in np.flatnonzero(~(gamma <= gamma_prev)):
                bad.append(f"k={block.k} j={j}: stepsize increased")
        for j, x in enumerate(block.path):
            if not np.all(spec.c_eval(x) < 0):
                bad.append(f"k={block.k} j={j}: infeasible iterate")
        chain = [rec.q_next, rec.qmu_next, rec.qmu_prev]
        if not math.isnan(rec.qmuprev_prev):
            chain.append(rec.qmuprev_prev)
        for lo, hi in zip(chain, chain[1:]):
            if not lo <= hi + SLACK * max(1.0, abs(hi)):
                bad.append(f"k={rec.k}: sandwich chain")
        if np.any(rec.y < 0):
            bad.append(f"k={rec.k}: negative multiplier")
    return bad


def test_criterion_3_invariants(capsys, reproduction, qbox_runs):
    inner = InnerParams()
    runs = [(rosenbrock_instance(), r) for r in reproduction.results]
    runs += [(rosenbrock_instance(), r) for r in reproduction.trace_runs.values()]
    runs += qbox_runs
    bad, checked = [], 0
    for spec, res in runs:
        bad += _invariant_violations(spec, res, inner)
        checked += len(res.trace)
    report(
        capsys, "3 (invariants)", not bad,
        f"{len(runs)} runs, {checked} accepted iterations, {len(bad)} violations"
        + (f"; first: {bad[0]}" if bad else ""),
    )


# 4 -------------------------------------------------------------------------


def _prox_cases(rng, count):
    for _ in range(count):
        gamma = float(np.exp(rng.uniform(np.log(1e-4), np.log(10.0))))
        yield gamma, rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(0, 1)


def test_criterion_4_prox_oracle(capsys):
    rng = np.random.default_rng(20240)
    worst = {"half": 0.0, "l1": 0.0, "box": 0.0}
    fails = []
    t0 = time.perf_counter()
    for gamma, s, u, v in _prox_cases(rng, 1000):
        cases = []
        scale = 3.0 * max(1.0, 1.5 * gamma ** (2.0 / 3.0))
        x = s * scale
        cases.append(("half", half_quasinorm_term, x, prox_half_quasinorm(np.array([x]), gamma)[0]))
        x = s * 3.0 * max(1.0, gamma)
        cases.append(("l1", l1_term(1.0), x, prox_l1(np.array([x]), gamma)[0]))
        lo, hi = -0.5 - u, 0.5 + v
        x = 3.0 * s
        cases.append(("box", box_term(lo, hi), x, prox_box_indicator(np.array([x]), lo, hi)[0]))
        for name, h, x, p in cases:
            t = brute_force_prox_1d(h, gamma, x)
            err = abs(p - t)
            obj_gap = (float(h(p)) + (p - x) ** 2 / (2 * gamma)) - (
                float(h(t)) + (t - x) ** 2 / (2 * gamma)
            )
            worst[name] = max(worst[name], err)
            if not (err <= 1e-8 and obj_gap <= 1e-8):
                fails.append((name, x, gamma, err))
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 5.0
    report(
        capsys, "4 (prox oracle)", ok,
        "max |prox - oracle|: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
        + f"; {len(fails)} mismatches in 3x1000 pairs; {elapsed:.2f} s",
    )


# 5 -------------------------------------------------------------------------

FD_PROBLEMS = ["rosenbrock", "qbox-1-0", "qbox-2-7", "qbox-3-1", "qbox-4-3"]


def test_criterion_5_derivatives(capsys):
    barrier = reciprocal_barrier()
    summary, failed = [], []
    for name in FD_PROBLEMS:
        spec = get_problem(name)
        pts = spec.sampler(np.random.default_rng(5), 100)
        fails = check_derivatives(spec, barrier, pts, mu=1.0, rtol=1e-5)
        n_bad = sum(len(v) for v in fails.values())
        summary.append(f"{name} {n_bad} failures")
        if n_bad:
            failed.append(name)
    report(capsys, "5 (finite differences)", not failed, "; ".join(summary) + " (100 points each)")


# 6 -------------------------------------------------------------------------


def test_criterion_6_convex_oracle(capsys, qbox_runs):
    outer = OuterParams()
    errs, bad = [], []
    for (n, seed), (spec, res) in zip(QBOX_CASES, qbox_runs):
        x_ref, _ = qp_active_set_oracle(*quadratic_box_data(n, seed))
        err = float(np.linalg.norm(res.x - x_ref))
        errs.append(err)
        if not (res.converged and build_kkt_report(res.pair, spec, outer).certified and err <= 1e-4):
            bad.append(spec.name)
    report(
        capsys, "6 (convex sanity oracle)", not bad,
        f"20 instances, max |x - x_oracle| {max(errs):.2e}, failures: {bad or 'none'}",
    )


# 7 -------------------------------------------------------------------------


def _csv_files(root):
    out = []
    for dirpath, _, files in os.walk(root):
        out += [os.path.relpath(os.path.join(dirpath, f), root) for f in files if f.endswith(".csv")]
    return sorted(out)


def test_criterion_7_determinism(capsys, reproduction, tmp_path):
    second = reproduce_rosenbrock(str(tmp_path / "reproduce_b"))
    a, b = _csv_files(reproduction.out_dir), _csv_files(second.out_dir)
    _, mismatch, errors = filecmp.cmpfiles(reproduction.out_dir, second.out_dir, a, shallow=False)
    ok = a == b and len(a) > 0 and not mismatch and not errors
    report(
        capsys, "7 (determinism)", ok,
        f"{len(a)} CSV files compared byte for byte, {len(mismatch) + len(errors)} differ",
    )
