"""Registered problem instances.

``rosenbrock``
    ``100 (x2 + 1 - (x1 + 1)^2)^2 + |x1|^0.5 + |x2|^0.5`` outside the disk
    of radius 1/2 centred at (-1/4, 1/4), encoded as
    ``c(x) = r^2 - ||x - x_C||^2 <= 0``.
``qbox-<n>-<seed>``
    Strongly convex quadratic, box indicator as ``g`` and ``n`` random
    linear inequalities, generated by a portable xorshift64* stream.
"""

from __future__ import annotations

import math
import re
from typing import Callable, Dict

import numpy as np

from ._accel import njit
from .core import IproxError, ProblemKernels, ProblemSpec
from .prox import (
    box_term,
    half_quasinorm_prox_kernel,
    half_quasinorm_term,
    prox_box_indicator,
    prox_half_quasinorm,
)

__all__ = [
    "ROSENBROCK_CENTER",
    "ROSENBROCK_RADIUS",
    "ROSENBROCK_MINIMIZERS",
    "TRACE_STARTS",
    "UnknownProblem",
    "rosenbrock_instance",
    "circle_starting_points",
    "circle_angles",
    "quadratic_box_problem",
    "quadratic_box_instance",
    "quadratic_box_data",
    "XorShift64Star",
    "register_problem",
    "get_problem",
    "list_problems",
]

ROSENBROCK_CENTER = (-0.25, 0.25)
ROSENBROCK_RADIUS = 0.5
# reported limit points (two decimals)
ROSENBROCK_MINIMIZERS = {
    "x1": (-0.12, -0.23),
    "x2": (0.21, 0.45),
    "x3": (-2.00, 0.0),
}
TRACE_STARTS = {"x2": (0.0, 1.05), "x3": (0.25, 0.8)}

_XC0, _XC1 = ROSENBROCK_CENTER
_RC2 = ROSENBROCK_RADIUS**2


class UnknownProblem(IproxError, KeyError):
    pass


# ---------------------------------------------------------------------------
# nonsmooth Rosenbrock
# ---------------------------------------------------------------------------


def _rb_f(x):
    t = x[1] + 1.0 - (x[0] + 1.0) ** 2
    return 100.0 * t * t


def _rb_grad(x):
    t = x[1] + 1.0 - (x[0] + 1.0) ** 2
    return np.array([-400.0 * t * (x[0] + 1.0), 200.0 * t])


def _rb_g(x):
    return float(np.sum(np.sqrt(np.abs(x))))


def _rb_c(x):
    return np.array([_RC2 - ((x[0] - _XC0) ** 2 + (x[1] - _XC1) ** 2)])


def _rb_jac(x):
    return np.array([[-2.0 * (x[0] - _XC0), -2.0 * (x[1] - _XC1)]])


@njit(cache=True)
def _rb_f_k(x):
    t = x[1] + 1.0 - (x[0] + 1.0) ** 2
    return 100.0 * t * t


@njit(cache=True)
def _rb_grad_k(x):
    t = x[1] + 1.0 - (x[0] + 1.0) ** 2
    out = np.empty(2)
    out[0] = -400.0 * t * (x[0] + 1.0)
    out[1] = 200.0 * t
    return out


@njit(cache=True)
def _rb_g_k(x):
    s = 0.0
    for i in range(x.size):
        s += math.sqrt(abs(x[i]))
    return s


@njit(cache=True)
def _rb_c_k(x):
    out = np.empty(1)
    out[0] = _RC2 - ((x[0] - _XC0) ** 2 + (x[1] - _XC1) ** 2)
    return out


@njit(cache=True)
def _rb_jac_k(x):
    out = np.empty((1, 2))
    out[0, 0] = -2.0 * (x[0] - _XC0)
    out[0, 1] = -2.0 * (x[1] - _XC1)
    return out


def _rb_sampler(rng, count, margin=0.05):
    pts = []
    while len(pts) < count:
        x = rng.uniform([-2.5, -1.5], [1.5, 2.0])
        if _rb_c(x)[0] < -margin:
            pts.append(x)
    return np.array(pts)


def rosenbrock_instance():
    """The nonsmooth Rosenbrock problem with the excluded disk."""
    return ProblemSpec(
        n=2,
        m=1,
        f_eval=_rb_f,
        grad_f_eval=_rb_grad,
        g_eval=_rb_g,
        prox_g_eval=prox_half_quasinorm,
        c_eval=_rb_c,
        jac_c_eval=_rb_jac,
        prox_bound_threshold=math.inf,
        name="rosenbrock",
        x0=TRACE_STARTS["x2"],
        sampler=_rb_sampler,
        coord_term=lambda i: half_quasinorm_term,
        kernels=ProblemKernels(
            f=_rb_f_k,
            grad_f=_rb_grad_k,
            g=_rb_g_k,
            prox_g=half_quasinorm_prox_kernel,
            c=_rb_c_k,
            jac_c=_rb_jac_k,
        ),
    )


def circle_angles(count):
    if count < 1:
        raise ValueError("count must be positive")
    return [2.0 * math.pi * i / count for i in range(count)]


def circle_starting_points(count):
    """``(0, 1/4) + 4/5 (cos t, sin t)`` for ``t = 2 pi i / count``."""
    return [
        np.array([0.8 * math.cos(t), 0.25 + 0.8 * math.sin(t)])
        for t in circle_angles(count)
    ]


# ---------------------------------------------------------------------------
# quadratic + box + linear inequalities
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


class XorShift64Star:
    """xorshift64* stream seeded through one splitmix64 step.

    state <- splitmix64(seed) (or 1 if that is 0); per draw:
    ``s ^= s >> 12; s ^= s << 25; s ^= s >> 27`` (mod 2^64), output
    ``s * 0x2545F4914F6CDD1D mod 2^64``; uniforms use the top 53 bits.
    """

    def __init__(self, seed):
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        self.state = z or 1

    def next_u64(self):
        s = self.state
        s ^= s >> 12
        s ^= (s << 25) & _MASK64
        s ^= s >> 27
        self.state = s
        return (s * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self, lo=0.0, hi=1.0):
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)


def quadratic_box_data(n, seed):
    """Raw data ``(Q, p, lo, hi, G, h)`` of the seeded instance.

    Draw order: M (n x n, row-major, U[-1,1]); target t (U[-2.5,2.5]);
    per coordinate lo_i = -U[0.5,1.5] then hi_i = U[0.5,1.5]; G (n x n,
    row-major, U[-1,1]); h (U[0.25,1]).  Then Q = I + M^T M / n, p = -Q t.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = XorShift64Star(seed)
    M = np.array([[rng.uniform(-1, 1) for _ in range(n)] for _ in range(n)])
    t = np.array([rng.uniform(-2.5, 2.5) for _ in range(n)])
    lo, hi = np.empty(n), np.empty(n)
    for i in range(n):
        lo[i] = -rng.uniform(0.5, 1.5)
        hi[i] = rng.uniform(0.5, 1.5)
    G = np.array([[rng.uniform(-1, 1) for _ in range(n)] for _ in range(n)])
    h = np.array([rng.uniform(0.25, 1.0) for _ in range(n)])
    Q = np.eye(n) + M.T @ M / n
    p = -Q @ t
    return Q, p, lo, hi, G, h


def quadratic_box_problem(Q, p, lo, hi, G, h, name="qbox"):
    """``1/2 x'Qx + p'x + indicator[lo, hi](x)`` subject to ``Gx - h <= 0``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    G = np.asarray(G, dtype=float).reshape(-1, Q.shape[0])
    h = np.atleast_1d(np.asarray(h, dtype=float))
    n, m = Q.shape[0], G.shape[0]
    if np.any(lo > hi):
        raise ValueError("box bounds must satisfy lo <= hi")

    def f(x):
        return 0.5 * float(x @ Q @ x) + float(p @ x)

    def grad(x):
        return Q @ x + p

    def g(x):
        return 0.0 if np.all((x >= lo) & (x <= hi)) else math.inf

    def prox(x, gamma):
        return prox_box_indicator(x, lo, hi)

    def c(x):
        return G @ x - h

    def jac(x):
        return G

    def sampler(rng, count, margin=0.05):
        pts = []
        while len(pts) < count:
            x = rng.uniform(lo, hi)
            if m == 0 or np.all(G @ x - h < -margin):
                pts.append(x)
        return np.array(pts)

    x0 = np.clip(np.zeros(n), lo, hi)
    return ProblemSpec(
        n=n,
        m=m,
        f_eval=f,
        grad_f_eval=grad,
        g_eval=g,
        prox_g_eval=prox,
        c_eval=c,
        jac_c_eval=jac,
        prox_bound_threshold=math.inf,
        name=name,
        x0=tuple(x0),
        sampler=sampler,
        coord_term=lambda i: box_term(lo[i], hi[i]),
    )


def quadratic_box_instance(n, seed):
    """Seeded instance ``qbox-<n>-<seed>``; the origin is strictly feasible."""
    return quadratic_box_problem(*quadratic_box_data(n, seed), name=f"qbox-{n}-{seed}")


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_REGISTRY: Dict[str, Callable[[], ProblemSpec]] = {"rosenbrock": rosenbrock_instance}
_QBOX = re.compile(r"^qbox-(\d+)-(\d+)$")


def register_problem(name, factory):
    """Make ``factory()`` addressable as ``name`` (e.g. from the CLI)."""
    _REGISTRY[name] = factory


def unregister_problem(name):
    _REGISTRY.pop(name, None)


def get_problem(name):
    if name in _REGISTRY:
        return _REGISTRY[name]()
    m = _QBOX.match(name)
    if m and int(m.group(1)) >= 1:
        return quadratic_box_instance(int(m.group(1)), int(m.group(2)))
    raise UnknownProblem(f"unknown problem {name!r}; see `iprox list-problems`")


def list_problems():
    return sorted(_REGISTRY) + ["qbox-<n>-<seed>"]
