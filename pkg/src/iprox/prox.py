"""Proximal operators and a brute-force 1-D prox oracle.

Every operator returns one element of

    prox_{gamma h}(x) = argmin_z  h(z) + ||z - x||^2 / (2 gamma).

The scalar rules (``*_scalar``) are ``@njit`` kernels used by the compiled
solver path; the array functions are plain numpy.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._accel import njit

__all__ = [
    "SeparableProx",
    "prox_half_quasinorm",
    "prox_l1",
    "prox_box_indicator",
    "half_quasinorm_scalar",
    "soft_threshold_scalar",
    "half_quasinorm_prox_kernel",
    "brute_force_prox_1d",
    "half_quasinorm_term",
    "l1_term",
    "box_term",
]



def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"stepsize gamma must be positive, got {gamma!r}")


@njit(cache=True)
def half_quasinorm_scalar(xi, gamma):
    """Global minimizer of ``|t|**0.5 + (t - xi)**2 / (2 gamma)``.

    Zero at or below the threshold ``1.5 * gamma**(2/3)`` (where the prox is
    set-valued at equality, zero is selected).
    """
    ax = abs(xi)
    if ax <= 1.5 * gamma ** (2.0 / 3.0):
        return 0.0
    phi = math.acos(-0.25 * gamma * (3.0 / ax) ** 1.5)
    return (2.0 / 3.0) * xi * (1.0 + math.cos((2.0 / 3.0) * phi))


@njit(cache=True)
def soft_threshold_scalar(xi, t):
    if xi > t:
        return xi - t
    if xi < -t:
        return xi + t
    return 0.0


@njit(cache=True)
def half_quasinorm_prox_kernel(x, gamma):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = half_quasinorm_scalar(x[i], gamma)
    return out


@dataclass(frozen=True)
class SeparableProx:
    """Vector prox assembled from a per-coordinate rule ``rule(x_i, gamma)``."""

    rule: Callable[[float, float], float]

    def __call__(self, x, gamma):
        _check_gamma(gamma)
        x = np.asarray(x, dtype=float)
        return np.array([self.rule(float(xi), float(gamma)) for xi in x.ravel()]).reshape(
            x.shape
        )


def prox_half_quasinorm(x, gamma):
    """Prox of ``gamma * sum_i |x_i|**0.5``, evaluated elementwise."""
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    ax = np.abs(x)
    keep = ax > 1.5 * gamma ** (2.0 / 3.0)
    if keep.any():
        xs = x[keep]
        phi = np.arccos(-0.25 * gamma * (3.0 / ax[keep]) ** 1.5)
        out[keep] = (2.0 / 3.0) * xs * (1.0 + np.cos((2.0 / 3.0) * phi))
    return out


def prox_l1(x, gamma, weight=1.0):
    """Soft thresholding: prox of ``gamma * weight * ||x||_1``."""
    _check_gamma(gamma)
    if weight < 0:
        raise ValueError("weight must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - gamma * weight, 0.0)


def prox_box_indicator(x, lo, hi, gamma=None):
    """Projection onto the box ``[lo, hi]``; ``gamma`` is accepted and ignored."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box bounds must satisfy lo <= hi componentwise")
    return np.clip(np.asarray(x, dtype=float), lo, hi)


# scalar summands, array-friendly, for the oracle and for separable checks


def half_quasinorm_term(t):
    return np.sqrt(np.abs(t))


def l1_term(weight=1.0):
    return lambda t: weight * np.abs(t)


def box_term(lo, hi):
    lo, hi = float(lo), float(hi)

    def term(t):
        t = np.asarray(t)
        val = np.where((t >= lo) & (t <= hi), 0.0, np.inf)
        return val if val.ndim else float(val)

    return term


_ZOOM_POINTS = 201
_CHUNK = 8192


@functools.lru_cache(maxsize=8)
def _unit_grid(points):
    g = np.linspace(-1.0, 1.0, points)
    g[points // 2] = 0.0
    g.setflags(write=False)
    return g


@functools.lru_cache(maxsize=1)
def _zoom_steps():
    z = np.linspace(0, 1, _ZOOM_POINTS, dtype=np.longdouble)
    z.setflags(write=False)
    return z


_local = threading.local()


def _work_buffer(points):
    buf = getattr(_local, "buf", None)
    if buf is None or buf.size != points:
        buf = _local.buf = np.empty(points)
    return buf


def _eval_term(h, t):
    try:
        v = np.asarray(h(t))
        if v.shape != t.shape:
            raise ValueError
        return v
    except (TypeError, ValueError):
        return np.array([h(s) for s in t], dtype=np.longdouble)


def brute_force_prox_1d(
    h, gamma, x, half_width=None, grid_points=100_001, width=1e-10, candidates=3
):
    """Minimize ``h(t) + (t - x)**2 / (2 gamma)`` by grid search plus refinement.

    The objective is scanned on a uniform grid over ``[-half_width,
    half_width]`` (default ``|x| + 1``).  Each of the lowest few discrete
    local minima is refined by repeatedly re-gridding its bracket (bracket
    shrinks to the two neighbours of the best point) until it is narrower
    than ``width``.  Refinement runs in extended precision so flat minima
    are still located to ``width``.
    Among candidates whose objective values tie to within a few units of
    extended-precision roundoff, the one closest to zero wins.  Meant as a
    test oracle: slow, but independent of any closed form.  ``h`` should
    accept numpy arrays; scalar-only callables are looped over.
    """
    _check_gamma(gamma)
    if grid_points < 1000:
        raise ValueError("grid_points must be at least 1000")
    ld = np.longdouble
    xl, two_gamma = ld(x), 2 * ld(gamma)
    hw = abs(float(x)) + 1.0 if half_width is None else float(half_width)
    if grid_points % 2 == 0:
        grid_points += 1  # keep t = 0 on the grid

    def phi(t):
        return _eval_term(h, t) + (t - xl) ** 2 / two_gamma

    # coarse scan in double precision only locates the basins
    unit = _unit_grid(grid_points)
    obj = _work_buffer(grid_points)
    scale = 1.0 / (2.0 * gamma)
    # chunks keep temporaries small enough for the allocator to recycle
    for lo in range(0, grid_points, _CHUNK):
        seg = unit[lo : lo + _CHUNK] * hw
        quad = seg - float(x)
        quad *= quad
        quad *= scale
        quad += _eval_term(h, seg)
        obj[lo : lo + _CHUNK] = quad
    mid = obj[1:-1]
    local = np.flatnonzero((mid <= obj[:-2]) & (mid <= obj[2:]) & np.isfinite(mid)) + 1
    if np.isfinite(obj[0]) and obj[0] <= obj[1]:
        local = np.append(local, 0)
    if np.isfinite(obj[-1]) and obj[-1] <= obj[-2]:
        local = np.append(local, grid_points - 1)
    if local.size == 0:
        local = np.array([int(np.argmin(obj))])
    order = local[np.argsort(obj[local], kind="stable")][:candidates]

    best = []
    for i in order:
        a = ld(unit[max(i - 1, 0)] * hw)
        b = ld(unit[min(i + 1, grid_points - 1)] * hw)
        t = ld(unit[i] * hw)
        v = ld(h(t)) + (t - xl) ** 2 / two_gamma
        best.append((v, t))
        while b - a > width:
            zoom = a + (b - a) * _zoom_steps()
            vals = phi(zoom)
            k = int(np.argmin(vals))
            if vals[k] < v:
                t, v = zoom[k], vals[k]
            a = zoom[max(k - 1, 0)]
            b = zoom[min(k + 1, _ZOOM_POINTS - 1)]
        best.append((v, t))
    fmin = min(v for v, _ in best)
    tie = 8 * np.finfo(ld).eps * max(ld(1), abs(fmin))
    return float(min((abs(t), t) for v, t in best if v <= fmin + tie)[1])
