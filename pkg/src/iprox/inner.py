"""Adaptive forward-backward solver for the barrier subproblem.

For fixed ``mu > 0`` the subproblem is ``min q_mu = f_mu + g``.  Each
iteration takes a proximal gradient step from the current strictly
feasible point and backtracks (``gamma <- beta * gamma``) until the trial
point is strictly feasible, decreases ``q_mu`` sufficiently, and certifies
a local Lipschitz estimate of ``grad f_mu``.  The stepsize is carried over
between iterations and never increased.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import _kernels
from ._accel import numba_enabled
from .core import (
    EvaluationFault,
    FeasibilityError,
    InnerParams,
    InvariantViolation,
    eval_barrier_gradient,
    eval_constraints,
    eval_inner_objective,
)

__all__ = [
    "InnerStep",
    "InnerResult",
    "LinesearchOutcome",
    "forward_backward_step",
    "linesearch_check",
    "ipfb_solve",
    "debug_enabled",
]

STATUSES = {
    _kernels.CONVERGED: "converged",
    _kernels.ITERATION_CAP: "iteration_cap",
    _kernels.BACKTRACK_CAP: "backtrack_cap",
    _kernels.STEPSIZE_UNDERFLOW: "stepsize_underflow",
}
_FAULTS = {
    _kernels.FAULT_F: "f_eval",
    _kernels.FAULT_G: "g_eval",
    _kernels.FAULT_C: "c_eval",
    _kernels.FAULT_GRAD: "grad_f_eval/jac_c_eval",
    _kernels.FAULT_PROX: "prox_g_eval",
}

# absolute+relative slack for the debug-mode invariant assertions
_SLACK = 1e-12


def debug_enabled():
    """Per-iteration invariant assertions, switched on by ``IPROX_DEBUG=1``."""
    return os.environ.get("IPROX_DEBUG", "0").strip().lower() in {"1", "true", "yes", "on"}


# columns of InnerResult.table; evaluation counts are cumulative within the call
STEP_COLUMNS = (
    "gamma",
    "q_mu",
    "residual",
    "primal_residual",
    "step_norm",
    "backtracks",
    "grad_evals",
    "prox_evals",
)


@dataclass(frozen=True)
class InnerStep:
    """One accepted inner iteration ``j`` (``x`` is the accepted ``z_bar^j``)."""

    j: int
    gamma: float
    q_mu: float
    residual: float
    primal_residual: float
    step_norm: float
    backtracks: int
    grad_evals: int
    prox_evals: int
    x: np.ndarray = field(repr=False)


@dataclass
class InnerResult:
    z_star: np.ndarray
    residual_vector: np.ndarray
    residual_norm: float
    final_gamma: float
    iterations: int
    status: str
    grad_evals: int = 0
    prox_evals: int = 0
    q_start: float = math.nan
    q_star: float = math.nan
    table: np.ndarray = field(default_factory=lambda: np.empty((0, len(STEP_COLUMNS))), repr=False)
    path: np.ndarray = field(default_factory=lambda: np.empty((0, 0)), repr=False)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def steps(self) -> List[InnerStep]:
        """Accepted iterations as objects (built on demand from ``table``)."""
        return [
            InnerStep(
                j=j,
                gamma=float(row[0]),
                q_mu=float(row[1]),
                residual=float(row[2]),
                primal_residual=float(row[3]),
                step_norm=float(row[4]),
                backtracks=int(row[5]),
                grad_evals=int(row[6]),
                prox_evals=int(row[7]),
                x=self.path[j].copy(),
            )
            for j, row in enumerate(self.table)
        ]


@dataclass
class LinesearchOutcome:
    """Result of the three acceptance tests for a trial point.

    ``reason`` is ``None`` on pass, else ``"boundary"``, ``"decrease"`` or
    ``"lipschitz"`` for the first failed test.  Values computed along the
    way are kept so an accepted point's objective and gradient can be
    reused by the next iteration.
    """

    passed: bool
    reason: Optional[str] = None
    c_bar: Optional[np.ndarray] = None
    q_bar: float = math.nan
    grad_bar: Optional[np.ndarray] = None
    grad_evals: int = 0

    def __bool__(self):
        return self.passed


def _sq(v):
    return float(np.sum(v * v))


def _require_strictly_feasible(spec, z, what="z"):
    cvals = eval_constraints(spec, z)
    bad = np.flatnonzero(cvals >= 0)
    if bad.size:
        i = int(bad[0])
        raise FeasibilityError(
            f"{what} is not strictly feasible: c_{i} = {cvals[i]:g} >= 0", index=i
        )
    return cvals


def forward_backward_step(spec, barrier, mu, z, gamma, grad=None):
    """``prox_{gamma g}(z - gamma * grad f_mu(z))`` (one selection).

    ``grad`` may pass a cached ``grad f_mu(z)``, in which case the caller
    vouches for ``c(z) < 0``; otherwise an infeasible ``z`` raises
    :class:`FeasibilityError`.  The output is not guaranteed to be
    strictly feasible.
    """
    if not 0 < gamma < spec.prox_bound_threshold:
        raise ValueError(
            f"gamma must lie in (0, {spec.prox_bound_threshold}), got {gamma!r}"
        )
    z = np.asarray(z, dtype=float)
    if grad is None:
        grad = eval_barrier_gradient(spec, barrier, mu, z)
    out = np.asarray(spec.prox_g_eval(z - gamma * grad, gamma), dtype=float)
    if out.shape != z.shape or np.isnan(out).any():
        raise EvaluationFault("prox_g_eval returned NaN or a wrongly shaped array")
    return out


def linesearch_check(
    spec, barrier, mu, z, z_bar, gamma, alpha, q_z=None, grad_z=None
):
    """Evaluate the acceptance tests for ``z_bar`` in order, short-circuiting.

    (i) ``c(z_bar) < 0``; (ii) sufficient decrease
    ``q_mu(z_bar) <= q_mu(z) - (1 - alpha) / (2 gamma) ||z_bar - z||^2``;
    (iii) ``||grad f_mu(z_bar) - grad f_mu(z)|| <= alpha / gamma ||z_bar - z||``.
    ``q_z`` and ``grad_z`` are the cached values at ``z`` (computed when
    omitted).  A failed (i) costs no further evaluations.
    """
    z = np.asarray(z, dtype=float)
    z_bar = np.asarray(z_bar, dtype=float)
    evals = 0
    if q_z is None:
        _require_strictly_feasible(spec, z)
        q_z = eval_inner_objective(spec, barrier, mu, z)
    c_bar = eval_constraints(spec, z_bar)
    if np.any(c_bar >= 0):
        return LinesearchOutcome(False, "boundary", c_bar=c_bar)
    q_bar = eval_inner_objective(spec, barrier, mu, z_bar)
    dd = _sq(z_bar - z)
    if not q_bar <= q_z - (1.0 - alpha) / (2.0 * gamma) * dd:
        return LinesearchOutcome(False, "decrease", c_bar=c_bar, q_bar=q_bar)
    if grad_z is None:
        grad_z = eval_barrier_gradient(spec, barrier, mu, z)
        evals += 1
    grad_bar = eval_barrier_gradient(spec, barrier, mu, z_bar)
    evals += 1
    diff = grad_bar - grad_z
    if not math.sqrt(_sq(diff)) <= alpha / gamma * math.sqrt(dd):
        return LinesearchOutcome(
            False, "lipschitz", c_bar=c_bar, q_bar=q_bar, grad_bar=grad_bar, grad_evals=evals
        )
    return LinesearchOutcome(
        True, None, c_bar=c_bar, q_bar=q_bar, grad_bar=grad_bar, grad_evals=evals
    )


def _primal_residual(barrier, mu, cvals):
    if cvals.size == 0:
        return 0.0
    y = mu * np.asarray(barrier.db(cvals), dtype=float)
    return float(np.max(np.minimum(-cvals, y)))


def _use_kernel(spec, barrier, accel):
    return (
        spec.kernels is not None
        and barrier.kernels is not None
        and numba_enabled(accel)
    )


def ipfb_solve(
    spec,
    barrier,
    z0,
    mu,
    eps,
    params: InnerParams = InnerParams(),
    sink: Optional[Callable[[InnerStep], None]] = None,
    accel: Optional[bool] = None,
) -> InnerResult:
    """Minimize ``q_mu`` from the strictly feasible ``z0`` to ``eps``-stationarity.

    Returns the first accepted ``z_bar^j`` whose residual

        r = (z^j - z_bar^j) / gamma_j - grad f_mu(z^j) + grad f_mu(z_bar^j)

    has norm at most ``eps``; ``r`` lies in the regular subdifferential of
    ``q_mu`` at the returned point.  ``sink`` is called once per accepted
    iteration.  ``accel`` forces (True) or forbids (False) the compiled
    kernel; ``None`` follows ``IPROX_USE_NUMBA``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not mu >= 0:
        raise ValueError("mu must be nonnegative")
    if not params.gamma0 < spec.prox_bound_threshold:
        raise ValueError("gamma0 must be below the prox-boundedness threshold of g")
    z0 = np.array(z0, dtype=float).reshape(spec.n)
    _require_strictly_feasible(spec, z0, "z0")
    g0 = float(spec.g_eval(z0))
    if math.isnan(g0):
        raise EvaluationFault("g_eval returned NaN")
    if g0 == math.inf:
        raise FeasibilityError("z0 is outside dom g")

    if _use_kernel(spec, barrier, accel):
        result = _solve_compiled(spec, barrier, z0, mu, eps, params)
    else:
        result = _solve_numpy(spec, barrier, z0, mu, eps, params)
    if sink is not None:
        for step in result.steps:
            sink(step)
    return result


def _solve_numpy(spec, barrier, z0, mu, eps, p):
    debug = debug_enabled()
    z = z0
    grad_z = eval_barrier_gradient(spec, barrier, mu, z)
    q_z = eval_inner_objective(spec, barrier, mu, z)
    q_start = q_z
    grad_evals, prox_evals = 1, 0
    gamma = p.gamma0
    rows, xs = [], []
    r = np.full(spec.n, np.nan)
    res = math.nan

    def finish(status, iters):
        return InnerResult(
            z_star=z,
            residual_vector=r,
            residual_norm=res,
            final_gamma=gamma,
            iterations=iters,
            status=status,
            grad_evals=grad_evals,
            prox_evals=prox_evals,
            q_start=q_start,
            q_star=q_z,
            table=np.array(rows, dtype=float).reshape(len(rows), len(STEP_COLUMNS)),
            path=np.array(xs, dtype=float).reshape(len(xs), spec.n),
        )

    for j in range(p.max_inner_iters):
        backtracks = 0
        while True:
            z_bar = forward_backward_step(spec, barrier, mu, z, gamma, grad=grad_z)
            prox_evals += 1
            ls = linesearch_check(
                spec, barrier, mu, z, z_bar, gamma, p.alpha, q_z=q_z, grad_z=grad_z
            )
            grad_evals += ls.grad_evals
            if ls.passed:
                break
            gamma *= p.beta
            backtracks += 1
            if backtracks > p.max_backtracks:
                return finish("backtrack_cap", j)
            if gamma < p.gamma_floor:
                return finish("stepsize_underflow", j)
        grad_bar = ls.grad_bar
        r = (z - z_bar) / gamma - grad_z + grad_bar
        res = math.sqrt(_sq(r))
        step_norm = math.sqrt(_sq(z_bar - z))
        if debug:
            _assert_step(spec, ls, q_z, step_norm, gamma, p, rows)
        rows.append(
            (
                gamma,
                ls.q_bar,
                res,
                _primal_residual(barrier, mu, ls.c_bar),
                step_norm,
                backtracks,
                grad_evals,
                prox_evals,
            )
        )
        xs.append(z_bar)
        z, grad_z, q_z = z_bar, grad_bar, ls.q_bar
        if res <= eps:
            return finish("converged", j + 1)
    return finish("iteration_cap", p.max_inner_iters)


def _assert_step(spec, ls, q_z, step_norm, gamma, p, rows):
    if not np.all(ls.c_bar < 0):
        raise InvariantViolation("accepted iterate is not strictly feasible")
    bound = q_z - (1.0 - p.alpha) / (2.0 * gamma) * step_norm**2
    if not ls.q_bar <= bound + _SLACK * max(1.0, abs(bound)):
        raise InvariantViolation("sufficient decrease violated")
    if rows and gamma > rows[-1][0]:
        raise InvariantViolation("stepsize increased")


def _solve_compiled(spec, barrier, z0, mu, eps, p):
    k = spec.kernels
    b, db = barrier.kernels
    (status, fault, z, r, gamma, iters, grad_evals, prox_evals, table, path) = (
        _kernels.ipfb_kernel(
            k.f, k.grad_f, k.g, k.prox_g, k.c, k.jac_c, b, db,
            z0, float(mu), float(eps), float(p.gamma0), float(p.alpha), float(p.beta),
            int(p.max_inner_iters), int(p.max_backtracks), float(p.gamma_floor),
        )
    )
    if status == _kernels.FAULT:
        raise EvaluationFault(f"{_FAULTS.get(fault, 'evaluator')} returned NaN")
    q_start = eval_inner_objective(spec, barrier, mu, z0)
    return InnerResult(
        z_star=np.array(z),
        residual_vector=np.array(r),
        residual_norm=float(table[-1, 2]) if iters else math.nan,
        final_gamma=float(gamma),
        iterations=int(iters),
        status=STATUSES[status],
        grad_evals=int(grad_evals),
        prox_evals=int(prox_evals),
        q_start=q_start,
        q_star=float(table[-1, 1]) if iters else q_start,
        table=np.array(table),
        path=np.array(path),
    )
