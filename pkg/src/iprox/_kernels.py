"""Compiled forward-backward inner loop.

``ipfb_kernel`` performs the same arithmetic, in the same order, as the
numpy loop in :mod:`iprox.inner`; it only runs when the problem ships
:class:`~iprox.core.ProblemKernels` and the barrier carries scalar kernels.
The problem evaluators are passed in as jitted functions, so one
specialization is compiled per problem family.
"""

import math

import numpy as np

from ._accel import njit

# status codes shared with iprox.inner
CONVERGED = 0
ITERATION_CAP = 1
BACKTRACK_CAP = 2
STEPSIZE_UNDERFLOW = 3
FAULT = 4

# fault codes
FAULT_F = 1
FAULT_G = 2
FAULT_C = 3
FAULT_GRAD = 4
FAULT_PROX = 5

# step record layout
STEP_COLS = 8  # gamma, q, residual, primal residual, step norm, backtracks, grad evals, prox evals


@njit(cache=True)
def _norm(v):
    s = 0.0
    for i in range(v.size):
        s += v[i] * v[i]
    return math.sqrt(s)


@njit(cache=True)
def _has_nan(v):
    for i in range(v.size):
        if math.isnan(v[i]):
            return True
    return False


@njit
def _fmu(f, b, x, cvals, mu):
    # caller guarantees cvals < 0
    s = 0.0
    for i in range(cvals.size):
        s += b(cvals[i])
    return f(x) + mu * s


@njit
def _grad_fmu(grad_f, jac_c, db, x, cvals, mu):
    gr = grad_f(x).copy()
    if cvals.size:
        jac = jac_c(x)
        for i in range(cvals.size):
            w = mu * db(cvals[i])
            for j in range(gr.size):
                gr[j] += jac[i, j] * w
    return gr


@njit
def _primal_residual(db, cvals, mu):
    worst = 0.0
    for i in range(cvals.size):
        yi = mu * db(cvals[i])
        v = min(-cvals[i], yi)
        if i == 0 or v > worst:
            worst = v
    return worst


@njit(cache=True)
def _grow(buf):
    # explicit loops: slice assignment drags in slow-to-compile broadcasting
    rows, cols = buf.shape
    out = np.empty((2 * rows, cols))
    for i in range(rows):
        for j in range(cols):
            out[i, j] = buf[i, j]
    return out


# not cacheable: the signature contains the problem's own compiled functions
@njit(nogil=True)
def ipfb_kernel(
    f,
    grad_f,
    g,
    prox_g,
    c,
    jac_c,
    b,
    db,
    z0,
    mu,
    eps,
    gamma0,
    alpha,
    beta,
    max_iters,
    max_backtracks,
    gamma_floor,
):
    """Run the inner solver from a strictly feasible ``z0``.

    Returns ``(status, fault, z, r, gamma, iters, grad_evals, prox_evals,
    steps, path)``: ``z`` is the last accepted iterate, ``r`` its residual
    vector, ``steps`` one row per accepted iteration (see ``STEP_COLS``)
    and ``path`` the accepted iterates.
    """
    n = z0.size
    steps = np.empty((64, STEP_COLS))
    path = np.empty((64, n))
    r = np.full(n, np.nan)
    z = z0.copy()
    status = ITERATION_CAP
    fault = 0
    iters = 0
    prox_evals = 0
    gamma = gamma0

    cz = c(z)
    gz = _grad_fmu(grad_f, jac_c, db, z, cz, mu)
    grad_evals = 1
    qz = _fmu(f, b, z, cz, mu) + g(z)
    if _has_nan(cz):
        status, fault = FAULT, FAULT_C
    elif _has_nan(gz):
        status, fault = FAULT, FAULT_GRAD
    elif math.isnan(qz):
        status, fault = FAULT, FAULT_F

    while status == ITERATION_CAP and iters < max_iters:
        backtracks = 0
        accepted = False
        zb = z
        gb = gz
        cb = cz
        qb = qz
        dd = 0.0
        while not accepted:
            zb = prox_g(z - gamma * gz, gamma)
            prox_evals += 1
            cb = c(zb)
            if _has_nan(zb):
                status, fault = FAULT, FAULT_PROX
                break
            if _has_nan(cb):
                status, fault = FAULT, FAULT_C
                break
            feasible = True
            for i in range(cb.size):
                if cb[i] >= 0.0:
                    feasible = False
            if feasible:
                fb = f(zb)
                gval = g(zb)
                if math.isnan(fb):
                    status, fault = FAULT, FAULT_F
                    break
                if math.isnan(gval):
                    status, fault = FAULT, FAULT_G
                    break
                s = 0.0
                for i in range(cb.size):
                    s += b(cb[i])
                qb = fb + mu * s + gval
                dd = 0.0
                for i in range(n):
                    dd += (zb[i] - z[i]) * (zb[i] - z[i])
                if qb <= qz - (1.0 - alpha) / (2.0 * gamma) * dd:
                    gb = _grad_fmu(grad_f, jac_c, db, zb, cb, mu)
                    grad_evals += 1
                    if _has_nan(gb):
                        status, fault = FAULT, FAULT_GRAD
                        break
                    if _norm(gb - gz) <= alpha / gamma * math.sqrt(dd):
                        accepted = True
            if not accepted:
                gamma *= beta
                backtracks += 1
                if backtracks > max_backtracks:
                    status = BACKTRACK_CAP
                    break
                if gamma < gamma_floor:
                    status = STEPSIZE_UNDERFLOW
                    break
        if not accepted:
            break
        r = (z - zb) / gamma - gz + gb
        res = _norm(r)
        if iters == steps.shape[0]:
            steps = _grow(steps)
            path = _grow(path)
        steps[iters, 0] = gamma
        steps[iters, 1] = qb
        steps[iters, 2] = res
        steps[iters, 3] = _primal_residual(db, cb, mu)
        steps[iters, 4] = math.sqrt(dd)
        steps[iters, 5] = backtracks
        steps[iters, 6] = grad_evals
        steps[iters, 7] = prox_evals
        for i in range(n):
            path[iters, i] = zb[i]
        iters += 1
        z = zb
        gz = gb
        qz = qb
        if res <= eps:
            status = CONVERGED
    return status, fault, z, r, gamma, iters, grad_evals, prox_evals, steps[:iters], path[:iters]
