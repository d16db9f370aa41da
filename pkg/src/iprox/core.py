"""Problem interface, barrier functions and the barrier-augmented objective.

A problem instance is

    minimize  f(x) + g(x)   subject to  c(x) <= 0

with ``f`` and ``c`` smooth and ``g`` proper, lsc and prox-bounded.  The
interior-point scheme replaces the constraints by ``mu * sum_i b(c_i(x))``
for a barrier ``b`` with domain ``(-inf, 0)``.

Extended reals are plain floats: ``math.inf`` is the "outside the domain"
sentinel.  NaN coming out of a user evaluator is never reinterpreted as
infeasibility; it raises :class:`EvaluationFault`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

from ._accel import njit

__all__ = [
    "IproxError",
    "EvaluationFault",
    "FeasibilityError",
    "InvariantViolation",
    "ProblemKernels",
    "ProblemSpec",
    "Barrier",
    "BarrierReport",
    "OuterParams",
    "InnerParams",
    "PrimalDualPair",
    "TraceRow",
    "OuterRecord",
    "SolveTrace",
    "TraceBlock",
    "TRACE_COLUMNS",
    "reciprocal_barrier",
    "inverse_square_barrier",
    "get_barrier",
    "BARRIERS",
    "eval_constraints",
    "eval_barrier_objective",
    "eval_inner_objective",
    "eval_barrier_gradient",
    "validate_barrier",
]


class IproxError(Exception):
    """Base class for library errors."""


class EvaluationFault(IproxError):
    """A user-supplied evaluator returned NaN (or an array of the wrong shape)."""


class FeasibilityError(IproxError, ValueError):
    """A point violates strict feasibility ``c(x) < 0`` (or ``g(x) < inf``)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InvariantViolation(AssertionError):
    """A runtime-checked algorithmic invariant failed (debug mode only)."""


# ---------------------------------------------------------------------------
# problem description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemKernels:
    """numba-compiled twins of the evaluators of a :class:`ProblemSpec`.

    Each entry is an ``@njit`` function taking float64 arrays: ``f(x)``,
    ``grad_f(x)``, ``g(x)``, ``prox_g(x, gamma)``, ``c(x)`` (length-m
    array) and ``jac_c(x)`` (m-by-n array).  They must compute the same
    maps as the numpy evaluators.
    """

    f: Any
    grad_f: Any
    g: Any
    prox_g: Any
    c: Any
    jac_c: Any


@dataclass(frozen=True)
class ProblemSpec:
    """An instance of ``min f + g  s.t.  c <= 0``.

    Evaluators must be pure.  ``prox_g_eval(x, gamma)`` returns *one*
    element of the (possibly set-valued) proximal mapping of ``gamma * g``.
    ``prox_bound_threshold`` is the prox-boundedness threshold of ``g``;
    stepsizes must stay strictly below it.

    The remaining fields are optional metadata used by the harness:
    ``x0`` is a default strictly feasible start, ``sampler(rng, count)``
    draws strictly feasible points for derivative checks, and
    ``coord_term(i)`` returns the scalar summand of a separable ``g``
    acting on coordinate ``i`` (used by the brute-force prox check).
    """

    n: int
    m: int
    f_eval: Callable[[np.ndarray], float]
    grad_f_eval: Callable[[np.ndarray], np.ndarray]
    g_eval: Callable[[np.ndarray], float]
    prox_g_eval: Callable[[np.ndarray, float], np.ndarray]
    c_eval: Callable[[np.ndarray], np.ndarray]
    jac_c_eval: Callable[[np.ndarray], np.ndarray]
    prox_bound_threshold: float = math.inf
    name: str = ""
    x0: Optional[tuple] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    coord_term: Optional[Callable[[int], Callable]] = None
    kernels: Optional[ProblemKernels] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if not self.prox_bound_threshold > 0:
            raise ValueError("prox_bound_threshold must be positive")


# ---------------------------------------------------------------------------
# barriers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Barrier:
    """Scalar barrier ``b`` with derivatives, vectorized over numpy arrays.

    ``b`` must return ``inf`` for ``t >= 0``.  ``d2b`` is kept for
    completeness and validated, but the solvers only use ``b`` and ``db``.
    ``kernels`` optionally holds ``(b, db)`` as scalar ``@njit`` functions
    for the compiled solver path.
    """

    name: str
    b: Callable
    db: Callable
    d2b: Callable
    kernels: Optional[tuple] = field(default=None, repr=False)


def _reciprocal_b(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(t < 0, -1.0 / np.where(t < 0, t, -1.0), np.inf)


def _reciprocal_db(t):
    t = np.asarray(t, dtype=float)
    return 1.0 / (t * t)


def _reciprocal_d2b(t):
    t = np.asarray(t, dtype=float)
    return -2.0 / (t * t * t)


@njit(cache=True)
def _reciprocal_b_kernel(t):
    if t < 0.0:
        return -1.0 / t
    return np.inf


@njit(cache=True)
def _reciprocal_db_kernel(t):
    return 1.0 / (t * t)


def _invsq_b(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t < 0, t, -1.0)
    return np.where(t < 0, 1.0 / (safe * safe), np.inf)


def _invsq_db(t):
    t = np.asarray(t, dtype=float)
    return -2.0 / (t * t * t)


def _invsq_d2b(t):
    t = np.asarray(t, dtype=float)
    return 6.0 / (t * t * t * t)


@njit(cache=True)
def _invsq_b_kernel(t):
    if t < 0.0:
        return 1.0 / (t * t)
    return np.inf


@njit(cache=True)
def _invsq_db_kernel(t):
    return -2.0 / (t * t * t)


def reciprocal_barrier():
    """``b(t) = -1/t`` on ``t < 0``, ``+inf`` otherwise."""
    return Barrier(
        "reciprocal",
        _reciprocal_b,
        _reciprocal_db,
        _reciprocal_d2b,
        kernels=(_reciprocal_b_kernel, _reciprocal_db_kernel),
    )


def inverse_square_barrier():
    """``b(t) = 1/t**2`` on ``t < 0``, ``+inf`` otherwise."""
    return Barrier(
        "inverse-square",
        _invsq_b,
        _invsq_db,
        _invsq_d2b,
        kernels=(_invsq_b_kernel, _invsq_db_kernel),
    )


BARRIERS = {
    "reciprocal": reciprocal_barrier,
    "inverse-square": inverse_square_barrier,
}


def get_barrier(name):
    try:
        return BARRIERS[name]()
    except KeyError:
        raise KeyError(
            f"unknown barrier {name!r}; choose from {sorted(BARRIERS)}"
        ) from None


@dataclass
class BarrierReport:
    """Outcome of :func:`validate_barrier`; ``failures`` lists broken axioms."""

    barrier: str
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures


def validate_barrier(barrier, sample_grid, rtol=1e-5):
    """Check the barrier axioms on a grid of negative reals.

    Checks nonnegativity of ``b``, positivity of ``b'``, agreement of
    ``b'`` and ``b''`` with central differences, the ``+inf`` sentinel on
    ``t >= 0`` and the divergence proxy ``b(-1e-8) >= 1e7``.
    """
    grid = np.asarray(sample_grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid >= 0):
        raise ValueError("sample_grid must be nonempty and strictly negative")
    report = BarrierReport(barrier.name)
    fails = report.failures
    for t in grid:
        bt = float(barrier.b(t))
        dbt = float(barrier.db(t))
        d2bt = float(barrier.d2b(t))
        if not bt >= 0:
            fails.append(f"nonnegativity: b({t:g}) = {bt:g} < 0")
        if not dbt > 0:
            fails.append(f"monotonicity: b'({t:g}) = {dbt:g} <= 0")
        # relative step keeps t +- h inside (-inf, 0)
        h = 1e-6 * abs(t)
        fd1 = (float(barrier.b(t + h)) - float(barrier.b(t - h))) / (2 * h)
        if not abs(fd1 - dbt) <= rtol * max(1.0, abs(dbt)):
            fails.append(f"derivative: b'({t:g}) = {dbt:g}, central difference {fd1:g}")
        fd2 = (float(barrier.db(t + h)) - float(barrier.db(t - h))) / (2 * h)
        if not abs(fd2 - d2bt) <= rtol * max(1.0, abs(d2bt)):
            fails.append(
                f"second derivative: b''({t:g}) = {d2bt:g}, central difference {fd2:g}"
            )
    for t in (0.0, 1.0):
        if float(barrier.b(t)) != math.inf:
            fails.append(f"domain: b({t:g}) is not +inf")
    edge = float(barrier.b(-1e-8))
    if not edge >= 1e7:
        fails.append(f"divergence: b(-1e-8) = {edge:g} < 1e7")
    return report


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OuterParams:
    """Tolerances and constants of the outer interior-point loop."""

    eps_p: float = 1e-5
    eps_d: float = 1e-5
    eps0: float = 1.0
    mu0: float = 1.0
    theta_eps: float = 0.25
    theta_mu: float = 0.25
    max_outer_iters: int = 200

    def __post_init__(self):
        for name in ("eps_p", "eps_d", "eps0", "mu0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("theta_eps", "theta_mu"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be positive")


@dataclass(frozen=True)
class InnerParams:
    """Constants of the forward-backward inner solver.

    ``max_inner_iters``, ``max_backtracks`` and ``gamma_floor`` are
    safeguards for finite precision; hitting one yields a non-converged
    status instead of an endless loop.
    """

    gamma0: float = 1.0
    alpha: float = 0.99
    beta: float = 0.5
    max_inner_iters: int = 1_000_000
    max_backtracks: int = 120
    gamma_floor: float = 1e-15

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        for name in ("alpha", "beta"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_inner_iters < 1 or self.max_backtracks < 1:
            raise ValueError("iteration safeguards must be positive")


# ---------------------------------------------------------------------------
# results and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrimalDualPair:
    """Candidate ``(x, y)`` with its KKT certificates.

    ``dual_residual`` is the certified bound on
    ``dist(-Jc(x)^T y, subdiff q(x))``, i.e. the tolerance ``eps_k`` of the
    inner solve that produced ``x``.  ``inner_residual`` is the norm of the
    residual vector actually achieved (never larger).
    """

    x: np.ndarray
    y: np.ndarray
    dual_residual: float
    primal_residual: float
    inner_residual: float = math.nan
    residual_vector: Optional[np.ndarray] = None


TRACE_COLUMNS = (
    "k",
    "j",
    "gamma",
    "q_mu",
    "inner_residual",
    "primal_residual",
    "eps_k",
    "mu_k",
    "grad_evals",
    "prox_evals",
)


@dataclass(frozen=True)
class TraceRow:
    """One accepted inner iteration, with cumulative evaluation counts."""

    k: int
    j: int
    gamma: float
    q_mu: float
    inner_residual: float
    primal_residual: float
    eps_k: float
    mu_k: float
    grad_evals: int
    prox_evals: int
    x: np.ndarray = field(repr=False, compare=False, default=None)
    step_norm: float = 0.0
    backtracks: int = 0

    def csv_fields(self):
        return [getattr(self, name) for name in TRACE_COLUMNS]


@dataclass(frozen=True)
class OuterRecord:
    """Boundary marker emitted after each outer iteration ``k``.

    ``q_next``, ``qmu_next``, ``qmu_prev`` and ``qmuprev_prev`` are
    ``q(x^{k+1})``, ``q_{mu_k}(x^{k+1})``, ``q_{mu_k}(x^k)`` and
    ``q_{mu_{k-1}}(x^k)`` (NaN for ``k = 0``).
    """

    k: int
    mu_k: float
    eps_k: float
    x: np.ndarray
    y: np.ndarray
    inner_status: str
    inner_iterations: int
    inner_residual: float
    residual_vector: np.ndarray
    primal_residual: float
    y_inf: float
    q_next: float
    qmu_next: float
    qmu_prev: float
    qmuprev_prev: float
    grad_evals: int
    prox_evals: int


@dataclass(frozen=True)
class TraceBlock:
    """All accepted iterations of one inner solve, stored as arrays.

    ``table`` has the inner solver's step columns (gamma, q_mu, residual,
    primal_residual, step_norm, backtracks, grad_evals, prox_evals) with
    counts local to the call; ``base_grad``/``base_prox`` shift them to
    run-cumulative values.  ``path`` holds the accepted iterates.
    """

    k: int
    eps_k: float
    mu_k: float
    base_grad: int
    base_prox: int
    table: np.ndarray
    path: np.ndarray
    j0: int = 0

    def __len__(self):
        return self.table.shape[0]

    def columns(self):
        """``len(self) x len(TRACE_COLUMNS)`` float array."""
        t = self.table
        out = np.empty((t.shape[0], len(TRACE_COLUMNS)))
        out[:, 0] = self.k
        out[:, 1] = self.j0 + np.arange(t.shape[0])
        out[:, 2:6] = t[:, 0:4]
        out[:, 6] = self.eps_k
        out[:, 7] = self.mu_k
        out[:, 8] = t[:, 6] + self.base_grad
        out[:, 9] = t[:, 7] + self.base_prox
        return out

    def rows(self):
        return [
            TraceRow(
                k=self.k,
                j=self.j0 + j,
                gamma=float(t[0]),
                q_mu=float(t[1]),
                inner_residual=float(t[2]),
                primal_residual=float(t[3]),
                eps_k=self.eps_k,
                mu_k=self.mu_k,
                grad_evals=self.base_grad + int(t[6]),
                prox_evals=self.base_prox + int(t[7]),
                x=self.path[j].copy(),
                step_norm=float(t[4]),
                backtracks=int(t[5]),
            )
            for j, t in enumerate(self.table)
        ]


def _row_as_block(row: TraceRow):
    t = np.array(
        [[row.gamma, row.q_mu, row.inner_residual, row.primal_residual, row.step_norm,
          row.backtracks, row.grad_evals, row.prox_evals]],
        dtype=float,
    )
    x = np.atleast_1d(np.asarray(row.x if row.x is not None else [], dtype=float))
    return TraceBlock(row.k, row.eps_k, row.mu_k, 0, 0, t, x.reshape(1, -1), j0=row.j)


@dataclass
class SolveTrace:
    """Ordered inner-iteration rows plus outer boundary markers.

    Accepts :class:`TraceBlock`, :class:`TraceRow` and :class:`OuterRecord`
    items.  ``rows`` materializes per-iteration objects; ``columns()`` and
    ``iterates()`` give the same data as arrays.
    """

    blocks: List[TraceBlock] = field(default_factory=list)
    outer: List[OuterRecord] = field(default_factory=list)

    def __call__(self, item):
        if isinstance(item, OuterRecord):
            self.outer.append(item)
        elif isinstance(item, TraceBlock):
            self.blocks.append(item)
        else:
            self.blocks.append(_row_as_block(item))

    def __len__(self):
        return sum(len(b) for b in self.blocks)

    @property
    def rows(self) -> List[TraceRow]:
        out = []
        for b in self.blocks:
            out.extend(b.rows())
        return out

    def columns(self):
        """Trace table as an ``N x len(TRACE_COLUMNS)`` float array."""
        if not self.blocks:
            return np.empty((0, len(TRACE_COLUMNS)))
        return np.vstack([b.columns() for b in self.blocks])

    def iterates(self):
        """Accepted iterates, one row per trace row."""
        if not self.blocks:
            return np.empty((0, 0))
        return np.vstack([b.path for b in self.blocks])


# ---------------------------------------------------------------------------
# evaluation of f_mu, q_mu and grad f_mu
# ---------------------------------------------------------------------------


def _checked_scalar(value, what):
    value = float(value)
    if math.isnan(value):
        raise EvaluationFault(f"{what} returned NaN")
    return value


def _checked_array(value, shape, what):
    arr = np.asarray(value, dtype=float)
    if arr.size != math.prod(shape):
        raise EvaluationFault(f"{what} returned shape {arr.shape}, expected {shape}")
    arr = arr.reshape(shape)
    if np.isnan(arr).any():
        raise EvaluationFault(f"{what} returned NaN")
    return arr


def eval_constraints(spec, z):
    """``c(z)`` as a length-m float array, NaN-checked."""
    return _checked_array(spec.c_eval(z), (spec.m,), "c_eval")


def eval_barrier_objective(spec, barrier, mu, z):
    """``f_mu(z) = f(z) + mu * sum_i b(c_i(z))``; ``inf`` unless ``c(z) < 0``."""
    z = np.asarray(z, dtype=float)
    cvals = eval_constraints(spec, z)
    if np.any(cvals >= 0):
        return math.inf
    fval = _checked_scalar(spec.f_eval(z), "f_eval")
    if spec.m == 0 or mu == 0:
        return fval
    bvals = np.asarray(barrier.b(cvals), dtype=float)
    return fval + mu * float(np.sum(bvals))


def eval_inner_objective(spec, barrier, mu, z):
    """``q_mu(z) = f_mu(z) + g(z)``; ``inf`` outside ``dom g`` or ``c(z) < 0``."""
    fmu = eval_barrier_objective(spec, barrier, mu, z)
    if fmu == math.inf:
        return math.inf
    gval = _checked_scalar(spec.g_eval(np.asarray(z, dtype=float)), "g_eval")
    return fmu + gval


def eval_barrier_gradient(spec, barrier, mu, z):
    """``grad f_mu(z) = grad f(z) + mu * sum_i b'(c_i(z)) grad c_i(z)``.

    Raises :class:`FeasibilityError` (carrying the offending index) when
    some ``c_i(z) >= 0``.
    """
    z = np.asarray(z, dtype=float)
    cvals = eval_constraints(spec, z)
    bad = np.flatnonzero(cvals >= 0)
    if bad.size:
        i = int(bad[0])
        raise FeasibilityError(
            f"constraint {i} is not strictly satisfied: c_{i}(z) = {cvals[i]:g}",
            index=i,
        )
    grad = _checked_array(spec.grad_f_eval(z), (spec.n,), "grad_f_eval").copy()
    if spec.m:
        jac = _checked_array(spec.jac_c_eval(z), (spec.m, spec.n), "jac_c_eval")
        weights = mu * np.asarray(barrier.db(cvals), dtype=float)
        grad += jac.T @ weights
    return grad


def sample_grid_default() -> Sequence[float]:
    """Log-spaced grid on ``[-10, -1e-4]`` used by the barrier checks."""
    return -np.logspace(-4, 1, 41)
