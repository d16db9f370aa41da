"""Finite-difference, prox-oracle and barrier checks for a problem instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .core import (
    eval_barrier_gradient,
    eval_barrier_objective,
    sample_grid_default,
    validate_barrier,
)
from .prox import brute_force_prox_1d

__all__ = [
    "fd_step",
    "central_difference_gradient",
    "central_difference_jacobian",
    "relative_error",
    "Check",
    "ValidationReport",
    "check_derivatives",
    "check_prox",
    "validate_problem",
]


def fd_step(z):
    return np.maximum(1e-6, 1e-6 * np.abs(z))


def central_difference_gradient(fun, z):
    z = np.asarray(z, dtype=float)
    h = fd_step(z)
    out = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h[i]
        out[i] = (fun(z + e) - fun(z - e)) / (2.0 * h[i])
    return out


def central_difference_jacobian(fun, z):
    z = np.asarray(z, dtype=float)
    h = fd_step(z)
    cols = []
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h[i]
        cols.append((np.asarray(fun(z + e), float) - np.asarray(fun(z - e), float)) / (2.0 * h[i]))
    return np.stack(cols, axis=-1)


def relative_error(analytic, reference):
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    scale = max(1.0, float(np.max(np.abs(reference))) if reference.size else 1.0)
    return float(np.max(np.abs(analytic - reference))) / scale if reference.size else 0.0


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    problem: str
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, failures, total):
        detail = f"{total - len(failures)}/{total} ok"
        if failures:
            detail += "; first failure: " + failures[0]
        self.checks.append(Check(name, not failures, detail))


def check_derivatives(spec, barrier, points, mu=1.0, rtol=1e-5):
    """Compare grad f, Jc and grad f_mu against central differences.

    Returns a dict ``{check name: [failure messages]}``.
    """
    fails = {"grad_f": [], "jac_c": [], "grad_f_mu": []}
    for z in points:
        z = np.asarray(z, dtype=float)
        fd = central_difference_gradient(spec.f_eval, z)
        err = relative_error(spec.grad_f_eval(z), fd)
        if not err <= rtol:
            fails["grad_f"].append(f"at {z.tolist()}: relative error {err:.2e}")
        if spec.m:
            fd = central_difference_jacobian(spec.c_eval, z).reshape(spec.m, spec.n)
            err = relative_error(np.asarray(spec.jac_c_eval(z)).reshape(spec.m, spec.n), fd)
            if not err <= rtol:
                fails["jac_c"].append(f"at {z.tolist()}: relative error {err:.2e}")
        fd = central_difference_gradient(
            lambda x: eval_barrier_objective(spec, barrier, mu, x), z
        )
        err = relative_error(eval_barrier_gradient(spec, barrier, mu, z), fd)
        if not err <= rtol:
            fails["grad_f_mu"].append(f"at {z.tolist()}: relative error {err:.2e}")
    return fails


def check_prox(spec, rng, samples=50, tol=1e-8):
    """Selection validity of ``prox_g_eval`` against the 1-D brute-force oracle.

    Needs ``spec.coord_term`` (separable ``g``); otherwise only finiteness
    of ``g`` at the prox output and objective decrease versus the input
    are checked.
    """
    fails = []
    gmax = min(10.0, spec.prox_bound_threshold / 2.0)
    for _ in range(samples):
        x = rng.uniform(-3.0, 3.0, size=spec.n)
        gamma = float(np.exp(rng.uniform(np.log(1e-4), np.log(gmax))))
        z = np.asarray(spec.prox_g_eval(x, gamma), dtype=float)
        gz = float(spec.g_eval(z))
        if not math.isfinite(gz):
            fails.append(f"g(prox) not finite at x={x.tolist()}, gamma={gamma:g}")
            continue
        if spec.coord_term is None:
            gx = float(spec.g_eval(x))
            lhs = gz + float(np.sum((z - x) ** 2)) / (2 * gamma)
            if not lhs <= gx + tol:
                fails.append(f"prox objective exceeds g(x) at x={x.tolist()}")
            continue
        for i in range(spec.n):
            h = spec.coord_term(i)
            t = brute_force_prox_1d(h, gamma, x[i], half_width=2 * abs(x[i]) + 2)
            mine = float(h(z[i])) + (z[i] - x[i]) ** 2 / (2 * gamma)
            best = float(h(t)) + (t - x[i]) ** 2 / (2 * gamma)
            if not mine <= best + tol:
                fails.append(
                    f"coordinate {i} at x_i={x[i]:g}, gamma={gamma:g}: "
                    f"objective {mine:.12g} > oracle {best:.12g}"
                )
    return fails


def validate_problem(spec, barrier, seed=0, points=100, prox_samples=50, rtol=1e-5):
    """Run every check on ``spec``; see :class:`ValidationReport`."""
    rng = np.random.default_rng(seed)
    report = ValidationReport(spec.name or "<anonymous>")
    if spec.sampler is None:
        raise ValueError("problem has no sampler for strictly feasible points")
    pts = spec.sampler(rng, points)
    for name, fails in check_derivatives(spec, barrier, pts, rtol=rtol).items():
        if name == "jac_c" and not spec.m:
            continue
        report.add(name, fails, len(pts))
    report.add("prox", check_prox(spec, rng, prox_samples), prox_samples)
    bar = validate_barrier(barrier, sample_grid_default())
    report.checks.append(
        Check(f"barrier:{barrier.name}", bar.passed, "; ".join(bar.failures) or "all axioms hold")
    )
    return report
