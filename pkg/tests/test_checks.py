import dataclasses

import numpy as np
import pytest

from iprox.checks import (
    central_difference_jacobian,
    check_derivatives,
    check_prox,
    fd_step,
    relative_error,
    validate_problem,
)
from iprox.problems import get_problem, rosenbrock_instance


def test_fd_step():
    np.testing.assert_array_equal(fd_step(np.array([0.0, 2.0, -1e3])), [1e-6, 2e-6, 1e-3])


def test_relative_error_scale():
    assert relative_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert relative_error([0.0], [1e-9]) == pytest.approx(1e-9)
    assert relative_error([110.0], [100.0]) == pytest.approx(0.1)


def test_jacobian_fd_linear():
    G = np.array([[1.0, 2.0], [3.0, -4.0]])
    np.testing.assert_allclose(central_difference_jacobian(lambda z: G @ z, np.ones(2)), G, rtol=1e-9)


@pytest.mark.parametrize("name", ["rosenbrock", "qbox-2-7"])
def test_validate_registered(name, barrier):
    rep = validate_problem(get_problem(name), barrier)
    assert rep.passed, [c for c in rep.checks if not c.passed]
    assert {c.name for c in rep.checks} >= {"grad_f", "grad_f_mu", "prox", "barrier:reciprocal"}


def test_validate_detects_wrong_gradient_sign(barrier):
    rb = rosenbrock_instance()
    bad = dataclasses.replace(rb, grad_f_eval=lambda x: -rb.grad_f_eval(x), kernels=None)
    rep = validate_problem(bad, barrier, points=10, prox_samples=5)
    assert not rep.passed
    failed = {c.name for c in rep.checks if not c.passed}
    assert "grad_f" in failed and "grad_f_mu" in failed


def test_detects_wrong_jacobian(barrier):
    rb = rosenbrock_instance()
    bad = dataclasses.replace(rb, jac_c_eval=lambda x: 2 * rb.jac_c_eval(x), kernels=None)
    fails = check_derivatives(bad, barrier, rb.sampler(np.random.default_rng(1), 5))
    assert fails["jac_c"] and not fails["grad_f"]


def test_detects_bad_prox():
    rb = rosenbrock_instance()
    bad = dataclasses.replace(rb, prox_g_eval=lambda x, g: 0.5 * x, kernels=None)
    assert check_prox(bad, np.random.default_rng(0), samples=10)


def test_validate_requires_sampler(barrier):
    spec = dataclasses.replace(rosenbrock_instance(), sampler=None)
    with pytest.raises(ValueError):
        validate_problem(spec, barrier)
