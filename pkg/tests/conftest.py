import math

import numpy as np
import pytest

from iprox.core import ProblemSpec, reciprocal_barrier
from iprox.problems import rosenbrock_instance


def smooth_spec(n=1, f=None, grad=None, c=None, jac=None, m=1, name="smooth"):
    """Spec with g == 0 (identity prox)."""
    return ProblemSpec(
        n=n,
        m=m,
        f_eval=f or (lambda z: 0.0),
        grad_f_eval=grad or (lambda z: np.zeros(n)),
        g_eval=lambda z: 0.0,
        prox_g_eval=lambda z, gamma: np.array(z, dtype=float),
        c_eval=c or (lambda z: np.array([z[0] - 1.0])),
        jac_c_eval=jac or (lambda z: np.eye(1, n)),
        name=name,
    )


@pytest.fixture(scope="session")
def rb():
    return rosenbrock_instance()


@pytest.fixture(scope="session")
def barrier():
    return reciprocal_barrier()


@pytest.fixture
def linear_spec():
    """f == 0, c(z) = z_1 - 1 on R^1."""
    return smooth_spec()


@pytest.fixture(scope="session")
def tiny_quadratic():
    """f = 1/2 ||z||^2 on R^2, g == 0, c(z) = z_1 - 1."""
    return smooth_spec(
        n=2,
        f=lambda z: 0.5 * float(z @ z),
        grad=lambda z: np.array(z, dtype=float),
        c=lambda z: np.array([z[0] - 1.0]),
        jac=lambda z: np.array([[1.0, 0.0]]),
        name="tiny",
    )


def isclose(a, b, tol):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
