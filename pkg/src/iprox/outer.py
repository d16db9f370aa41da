"""Outer interior-point loop.

Each outer iteration solves the barrier subproblem for the current
``(mu_k, eps_k)`` warm-started at the previous output, recovers
multipliers ``y_i = mu_k * b'(c_i(x))`` and stops once ``eps_k <= eps_d``
and every complementarity measure ``min(-c_i, y_i)`` is at most ``eps_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import (
    EvaluationFault,
    FeasibilityError,
    InnerParams,
    InvariantViolation,
    OuterParams,
    OuterRecord,
    PrimalDualPair,
    SolveTrace,
    TraceBlock,
    eval_constraints,
    eval_inner_objective,
)
from .inner import debug_enabled, ipfb_solve

__all__ = [
    "IPResult",
    "multiplier_estimate",
    "primal_residual",
    "kkt_exit_test",
    "default_eps_rule",
    "default_mu_rule",
    "ip_solve",
]

_SLACK = 1e-12


def multiplier_estimate(c_vals, barrier, mu):
    """``y_i = mu * b'(c_i)``; requires every ``c_i < 0``."""
    c_vals = np.asarray(c_vals, dtype=float).ravel()
    bad = np.flatnonzero(~(c_vals < 0))
    if bad.size:
        i = int(bad[0])
        raise FeasibilityError(f"c_{i} = {c_vals[i]:g} is not negative", index=i)
    if not mu > 0:
        raise ValueError("mu must be positive")
    return mu * np.asarray(barrier.db(c_vals), dtype=float).reshape(c_vals.shape)


def primal_residual(c_vals, y):
    """``max_i min(-c_i, y_i)`` (zero when there are no constraints)."""
    c_vals = np.asarray(c_vals, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if c_vals.size == 0:
        return 0.0
    return float(np.max(np.minimum(-c_vals, y)))


def kkt_exit_test(eps_k, c_vals, y, outer: OuterParams):
    """The outer termination predicate, shared with the KKT report."""
    return eps_k <= outer.eps_d and primal_residual(c_vals, y) <= outer.eps_p


def default_eps_rule(eps_k, outer: OuterParams):
    return max(outer.eps_d, outer.theta_eps * eps_k)


def default_mu_rule(mu_k, outer: OuterParams):
    return outer.theta_mu * mu_k


@dataclass
class IPResult:
    """Outcome of :func:`ip_solve`.

    ``status`` is ``"converged"``, ``"outer_cap"`` or ``"inner_failure"``
    (then ``inner_status`` says why).  ``pair`` holds the last outer iterate
    and multiplier estimate either way.
    """

    status: str
    pair: PrimalDualPair
    trace: SolveTrace
    outer_iterations: int
    grad_evals: int
    prox_evals: int
    q_start: float
    q_star: float
    inner_status: str = "converged"
    history: List[OuterRecord] = field(default_factory=list, repr=False)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def x(self):
        return self.pair.x

    @property
    def y(self):
        return self.pair.y


def _q(spec, barrier, mu, x):
    return eval_inner_objective(spec, barrier, mu, x)


def _check_chain(rec):
    chain = [rec.q_next, rec.qmu_next, rec.qmu_prev]
    if not math.isnan(rec.qmuprev_prev):
        chain.append(rec.qmuprev_prev)
    for lo, hi in zip(chain, chain[1:]):
        if not lo <= hi + _SLACK * max(1.0, abs(hi)):
            raise InvariantViolation(f"outer monotonicity chain broken at k={rec.k}: {chain}")


def ip_solve(
    spec,
    barrier,
    x0,
    outer: OuterParams = OuterParams(),
    inner: InnerParams = InnerParams(),
    sink: Optional[Callable] = None,
    eps_rule: Callable = default_eps_rule,
    mu_rule: Callable = default_mu_rule,
    accel: Optional[bool] = None,
) -> IPResult:
    """Run the interior-point loop from the strictly feasible ``x0``.

    ``sink`` receives a :class:`TraceRow` per accepted inner iteration and
    an :class:`OuterRecord` at every outer boundary.  ``eps_rule`` and
    ``mu_rule`` map ``(current value, outer params)`` to the next value and
    must respect ``eps_{k+1} <= max(eps_d, theta_eps eps_k)`` and
    ``mu_{k+1} <= theta_mu mu_k``; the defaults take the upper bounds.
    """
    x = np.array(x0, dtype=float).reshape(spec.n)
    c0 = eval_constraints(spec, x)
    if np.any(c0 >= 0):
        i = int(np.flatnonzero(c0 >= 0)[0])
        raise FeasibilityError(f"x0 is not strictly feasible: c_{i} = {c0[i]:g}", index=i)
    g0 = float(spec.g_eval(x))
    if math.isnan(g0):
        raise EvaluationFault("g_eval returned NaN")
    if g0 == math.inf:
        raise FeasibilityError("x0 is outside dom g")

    debug = debug_enabled()
    trace = SolveTrace()
    history = []
    eps_k, mu_k = outer.eps0, outer.mu0
    mu_prev = math.nan
    grad_total = prox_total = 0
    q_start = _q(spec, barrier, 0.0, x)
    y = np.zeros(spec.m)
    res = None

    def emit(item):
        trace(item)
        if sink is not None:
            sink(item)

    for k in range(outer.max_outer_iters):
        res = ipfb_solve(spec, barrier, x, mu_k, eps_k, inner, accel=accel)
        block = TraceBlock(k, eps_k, mu_k, grad_total, prox_total, res.table, res.path)
        trace(block)
        if sink is not None:
            for row in block.rows():
                sink(row)
        grad_total += res.grad_evals
        prox_total += res.prox_evals
        x_next = res.z_star
        c_next = eval_constraints(spec, x_next)
        y = multiplier_estimate(c_next, barrier, mu_k) if spec.m else np.zeros(0)
        pres = primal_residual(c_next, y)
        rec = OuterRecord(
            k=k,
            mu_k=mu_k,
            eps_k=eps_k,
            x=x_next,
            y=y,
            inner_status=res.status,
            inner_iterations=res.iterations,
            inner_residual=res.residual_norm,
            residual_vector=res.residual_vector,
            primal_residual=pres,
            y_inf=float(np.max(np.abs(y))) if y.size else 0.0,
            q_next=_q(spec, barrier, 0.0, x_next),
            qmu_next=_q(spec, barrier, mu_k, x_next),
            qmu_prev=_q(spec, barrier, mu_k, x),
            qmuprev_prev=_q(spec, barrier, mu_prev, x) if k else math.nan,
            grad_evals=grad_total,
            prox_evals=prox_total,
        )
        history.append(rec)
        emit(rec)
        if debug:
            _check_chain(rec)
        if not res.converged:
            pair = PrimalDualPair(x_next, y, eps_k, pres, res.residual_norm, res.residual_vector)
            return IPResult(
                "inner_failure", pair, trace, k + 1, grad_total, prox_total,
                q_start, rec.q_next, inner_status=res.status, history=history,
            )
        x = x_next
        if kkt_exit_test(eps_k, c_next, y, outer):
            pair = PrimalDualPair(x, y, eps_k, pres, res.residual_norm, res.residual_vector)
            return IPResult(
                "converged", pair, trace, k + 1, grad_total, prox_total,
                q_start, rec.q_next, history=history,
            )
        eps_next = eps_rule(eps_k, outer)
        mu_next = mu_rule(mu_k, outer)
        if not 0 < eps_next <= max(outer.eps_d, outer.theta_eps * eps_k):
            raise ValueError(f"eps_rule produced an inadmissible tolerance {eps_next!r}")
        if not 0 < mu_next <= outer.theta_mu * mu_k:
            raise ValueError(f"mu_rule produced an inadmissible barrier weight {mu_next!r}")
        mu_prev = mu_k
        eps_k, mu_k = eps_next, mu_next

    last = history[-1]
    pair = PrimalDualPair(
        x, last.y, last.eps_k, last.primal_residual, last.inner_residual, last.residual_vector
    )
    return IPResult(
        "outer_cap", pair, trace, outer.max_outer_iters, grad_total, prox_total,
        q_start, last.q_next, history=history,
    )
