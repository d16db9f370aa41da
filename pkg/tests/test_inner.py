import math

import numpy as np
import pytest

from iprox._accel import numba_enabled
from iprox.core import (
    EvaluationFault,
    FeasibilityError,
    InnerParams,
    eval_barrier_gradient,
    eval_constraints,
    eval_inner_objective,
)
from iprox.inner import forward_backward_step, ipfb_solve, linesearch_check
from iprox.prox import prox_half_quasinorm

from conftest import smooth_spec

X0 = np.array([0.0, 1.05])


def test_fb_step_plain_gradient(tiny_quadratic, barrier):
    z = np.array([0.3, -0.4])
    out = forward_backward_step(tiny_quadratic, barrier, 0.0, z, 0.25)
    np.testing.assert_array_equal(out, z - 0.25 * z)


def test_fb_step_fixed_point(tiny_quadratic, barrier):
    z = np.zeros(2)
    np.testing.assert_array_equal(forward_backward_step(tiny_quadratic, barrier, 0.0, z, 1.0), z)


def test_fb_step_rosenbrock_composition(rb, barrier):
    grad = eval_barrier_gradient(rb, barrier, 1.0, X0)
    ref = prox_half_quasinorm(X0 - 1.0 * grad, 1.0)
    np.testing.assert_array_equal(forward_backward_step(rb, barrier, 1.0, X0, 1.0), ref)


def test_fb_step_rejects_infeasible_and_bad_gamma(linear_spec, barrier):
    with pytest.raises(FeasibilityError):
        forward_backward_step(linear_spec, barrier, 1.0, np.array([2.0]), 0.5)
    with pytest.raises(ValueError):
        forward_backward_step(linear_spec, barrier, 1.0, np.array([0.0]), 0.0)


def test_linesearch_boundary_short_circuits(linear_spec, barrier):
    out = linesearch_check(linear_spec, barrier, 1.0, np.array([0.0]), np.array([1.0]), 1.0, 0.99)
    assert not out and out.reason == "boundary" and out.grad_evals == 0


def test_linesearch_zero_displacement_passes(rb, barrier):
    out = linesearch_check(rb, barrier, 1.0, X0, X0.copy(), 1.0, 0.99)
    assert out.passed and out.reason is None


def test_linesearch_reports_decrease_then_lipschitz(rb, barrier):
    reasons = []
    gamma = 1.0
    while True:
        z_bar = forward_backward_step(rb, barrier, 1.0, X0, gamma)
        out = linesearch_check(rb, barrier, 1.0, X0, z_bar, gamma, 0.99)
        reasons.append(out.reason)
        if out:
            break
        gamma /= 2
    assert reasons[-1] is None
    assert set(reasons[:-1]) <= {"boundary", "decrease", "lipschitz"}
    assert out.grad_bar is not None and out.q_bar == eval_inner_objective(rb, barrier, 1.0, z_bar)


@pytest.mark.parametrize("accel", [False, True])
def test_first_accepted_gamma_is_deterministic(rb, barrier, accel):
    runs = [ipfb_solve(rb, barrier, X0, 1.0, 1.0, accel=accel) for _ in range(2)]
    g = [r.table[0, 0] for r in runs]
    assert g[0] == g[1] == 2.0**-11


def test_smooth_convex_case(tiny_quadratic, barrier):
    res = ipfb_solve(tiny_quadratic, barrier, np.zeros(2), 1e-8, 1e-6)
    assert res.converged
    grad = eval_barrier_gradient(tiny_quadratic, barrier, 1e-8, res.z_star)
    # with g == 0 the residual is exactly the gradient at the returned point
    assert np.linalg.norm(grad) <= 1e-6
    assert np.linalg.norm(res.z_star) <= 1e-6


def test_stationary_start_returns_immediately(tiny_quadratic, barrier):
    res = ipfb_solve(tiny_quadratic, barrier, np.zeros(2), 0.0, 1e-9)
    assert res.converged and res.iterations == 1
    assert res.residual_norm == 0.0 and res.table[0, 5] == 0
    np.testing.assert_array_equal(res.z_star, np.zeros(2))


@pytest.mark.parametrize("accel", [False, True])
def test_rosenbrock_first_outer_subproblem(rb, barrier, accel):
    res = ipfb_solve(rb, barrier, X0, 1.0, 1.0, accel=accel)
    assert res.converged and res.residual_norm <= 1.0
    assert np.all(eval_constraints(rb, res.z_star) < 0)
    assert eval_inner_objective(rb, barrier, 1.0, res.z_star) <= eval_inner_objective(
        rb, barrier, 1.0, X0
    )


@pytest.mark.parametrize("accel", [False, True])
def test_inner_invariants(rb, barrier, accel):
    p = InnerParams()
    mu, eps = 0.25, 1e-3
    res = ipfb_solve(rb, barrier, X0, mu, eps, p, accel=accel)
    assert res.converged
    z = X0
    q = eval_inner_objective(rb, barrier, mu, z)
    gamma_prev = p.gamma0
    total = 0.0
    qs = [q]
    for row, zb in zip(res.table, res.path):
        gamma, q_bar, backtracks = row[0], row[1], int(row[5])
        assert np.all(eval_constraints(rb, zb) < 0)
        assert gamma == gamma_prev * p.beta**backtracks
        dd = float(np.sum((zb - z) ** 2))
        bound = q - (1 - p.alpha) / (2 * gamma) * dd
        assert q_bar <= bound + 1e-12 * max(1.0, abs(bound))
        assert q_bar == pytest.approx(eval_inner_objective(rb, barrier, mu, zb), rel=1e-13)
        total += dd / gamma
        z_prev, z, q, gamma_prev = z, zb, q_bar, gamma
        qs.append(q)
    # residual certificate recomputed from the last two iterates
    r = (z_prev - z) / gamma_prev - eval_barrier_gradient(rb, barrier, mu, z_prev) + eval_barrier_gradient(
        rb, barrier, mu, z
    )
    np.testing.assert_allclose(res.residual_vector, r, rtol=1e-10, atol=1e-12)
    assert res.residual_norm == pytest.approx(np.linalg.norm(r), rel=1e-12)
    np.testing.assert_array_equal(res.z_star, z)
    # telescoped descent with the smallest observed value as lower bound
    assert total <= 2 * (qs[0] - min(qs)) / (1 - p.alpha) * (1 + 1e-12)


def test_status_iteration_cap(rb, barrier):
    res = ipfb_solve(rb, barrier, X0, 1.0, 1e-9, InnerParams(max_inner_iters=3))
    assert res.status == "iteration_cap" and res.iterations == 3
    np.testing.assert_array_equal(res.z_star, res.path[-1])


@pytest.mark.parametrize("accel", [False, True])
def test_status_backtrack_cap_and_underflow(rb, barrier, accel):
    res = ipfb_solve(rb, barrier, X0, 1.0, 1.0, InnerParams(max_backtracks=2), accel=accel)
    assert res.status == "backtrack_cap" and res.iterations == 0
    np.testing.assert_array_equal(res.z_star, X0)
    res = ipfb_solve(rb, barrier, X0, 1.0, 1.0, InnerParams(gamma_floor=0.1), accel=accel)
    assert res.status == "stepsize_underflow" and not res.converged


def test_preconditions(rb, linear_spec, barrier):
    with pytest.raises(FeasibilityError):
        ipfb_solve(linear_spec, barrier, np.array([1.0]), 1.0, 1e-3)
    with pytest.raises(ValueError):
        ipfb_solve(rb, barrier, X0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ipfb_solve(rb, barrier, X0, -1.0, 1.0)
    spec = smooth_spec()
    spec = type(spec)(**{**spec.__dict__, "prox_bound_threshold": 0.5})
    with pytest.raises(ValueError):
        ipfb_solve(spec, barrier, np.array([0.0]), 1.0, 1.0)
    spec = smooth_spec()
    spec = type(spec)(**{**spec.__dict__, "g_eval": lambda z: math.inf})
    with pytest.raises(FeasibilityError):
        ipfb_solve(spec, barrier, np.array([0.0]), 1.0, 1.0)


def test_nan_gradient_is_a_fault(barrier):
    spec = smooth_spec(n=1, grad=lambda z: np.array([np.nan]))
    with pytest.raises(EvaluationFault):
        ipfb_solve(spec, barrier, np.array([0.0]), 1.0, 1.0)


def test_sink_receives_each_step(rb, barrier):
    seen = []
    res = ipfb_solve(rb, barrier, X0, 1.0, 1.0, sink=seen.append)
    assert [s.j for s in seen] == list(range(res.iterations))
    assert seen[-1].residual == res.residual_norm


def test_debug_mode_assertions_pass(rb, barrier, monkeypatch):
    monkeypatch.setenv("IPROX_DEBUG", "1")
    assert ipfb_solve(rb, barrier, X0, 1.0, 1e-2, accel=False).converged


def test_env_flag(monkeypatch):
    monkeypatch.setenv("IPROX_USE_NUMBA", "0")
    assert not numba_enabled()
    assert numba_enabled(True)
    monkeypatch.setenv("IPROX_USE_NUMBA", "1")
    assert numba_enabled() and not numba_enabled(False)
