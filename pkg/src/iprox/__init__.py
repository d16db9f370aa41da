"""Interior-point proximal gradient method for nonsmooth constrained problems.

``min f(x) + g(x)  s.t.  c(x) <= 0`` with ``f``, ``c`` smooth and ``g``
prox-friendly.  The constraints are handled by a barrier; each barrier
subproblem is solved by a forward-backward method with a backtracking
linesearch.
"""

from .core import (
    Barrier,
    EvaluationFault,
    FeasibilityError,
    InnerParams,
    InvariantViolation,
    IproxError,
    OuterParams,
    PrimalDualPair,
    ProblemSpec,
    SolveTrace,
    get_barrier,
    inverse_square_barrier,
    reciprocal_barrier,
    validate_barrier,
)
from .diagnostics import build_kkt_report
from .inner import InnerResult, ipfb_solve
from .outer import IPResult, ip_solve
from .problems import get_problem, list_problems, quadratic_box_instance, rosenbrock_instance
from .prox import brute_force_prox_1d, prox_box_indicator, prox_half_quasinorm, prox_l1

__version__ = "0.1.0"

__all__ = [
    "Barrier",
    "EvaluationFault",
    "FeasibilityError",
    "InnerParams",
    "InnerResult",
    "InvariantViolation",
    "IPResult",
    "IproxError",
    "OuterParams",
    "PrimalDualPair",
    "ProblemSpec",
    "SolveTrace",
    "build_kkt_report",
    "brute_force_prox_1d",
    "get_barrier",
    "get_problem",
    "inverse_square_barrier",
    "ip_solve",
    "ipfb_solve",
    "list_problems",
    "prox_box_indicator",
    "prox_half_quasinorm",
    "prox_l1",
    "quadratic_box_instance",
    "reciprocal_barrier",
    "rosenbrock_instance",
    "validate_barrier",
]
