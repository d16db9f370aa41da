"""KKT reporting and multi-run analytics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .core import OuterParams, PrimalDualPair, ProblemSpec, eval_constraints
from .outer import kkt_exit_test, primal_residual

__all__ = [
    "KktRow",
    "KktReport",
    "build_kkt_report",
    "dual_certificate",
    "assign_basin",
    "cluster_limit_points",
]


@dataclass(frozen=True)
class KktRow:
    index: int
    c: float
    y: float
    complementarity: float
    active: bool


@dataclass(frozen=True)
class KktReport:
    """Per-constraint complementarity table plus the dual certificate.

    ``certified`` uses exactly the outer loop's exit arithmetic: the
    certified dual bound (``eps_k``) against ``eps_d`` and every
    ``min(-c_i, y_i)`` against ``eps_p``.  The activity flag
    (``|c_i| <= 10 eps_p``) is for display only.
    """

    rows: List[KktRow]
    dual_bound: float
    dual_certificate_norm: float
    primal_residual: float
    eps_p: float
    eps_d: float
    certified: bool

    @property
    def classification(self):
        return "eps-KKT certified" if self.certified else "not certified"

    def to_dict(self):
        return {
            "classification": self.classification,
            "certified": self.certified,
            "dual_bound": self.dual_bound,
            "dual_certificate_norm": self.dual_certificate_norm,
            "primal_residual": self.primal_residual,
            "eps_p": self.eps_p,
            "eps_d": self.eps_d,
            "constraints": [
                {
                    "index": r.index,
                    "c": r.c,
                    "y": r.y,
                    "complementarity": r.complementarity,
                    "active": r.active,
                }
                for r in self.rows
            ],
        }


def dual_certificate(spec: ProblemSpec, pair: PrimalDualPair):
    """Subgradient ``v in subdiff q(x)`` and the distance bound it certifies.

    The inner residual ``r`` lies in ``subdiff q_mu(x) = subdiff q(x) +
    Jc(x)^T y``, so ``v = r - Jc(x)^T y`` is a subgradient of ``q`` and
    ``dist(-Jc(x)^T y, subdiff q(x)) <= ||-Jc(x)^T y - v|| = ||r||``.
    Returns ``(v, bound)``; ``(None, nan)`` when no residual is attached.
    """
    if pair.residual_vector is None or np.isnan(pair.residual_vector).any():
        return None, math.nan
    r = np.asarray(pair.residual_vector, dtype=float)
    if spec.m:
        jty = np.asarray(spec.jac_c_eval(pair.x), dtype=float).reshape(spec.m, spec.n).T @ pair.y
    else:
        jty = np.zeros(spec.n)
    v = r - jty
    return v, float(np.linalg.norm(-jty - v))


def build_kkt_report(pair: PrimalDualPair, spec: ProblemSpec, outer: OuterParams) -> KktReport:
    cvals = eval_constraints(spec, pair.x)
    y = np.asarray(pair.y, dtype=float)
    rows = [
        KktRow(
            index=i,
            c=float(cvals[i]),
            y=float(y[i]),
            complementarity=float(min(-cvals[i], y[i])),
            active=bool(abs(cvals[i]) <= 10.0 * outer.eps_p),
        )
        for i in range(spec.m)
    ]
    _, cert = dual_certificate(spec, pair)
    return KktReport(
        rows=rows,
        dual_bound=float(pair.dual_residual),
        dual_certificate_norm=cert,
        primal_residual=primal_residual(cvals, y),
        eps_p=outer.eps_p,
        eps_d=outer.eps_d,
        certified=bool(kkt_exit_test(pair.dual_residual, cvals, y, outer)),
    )


def assign_basin(x, references: dict, tol=1e-2) -> Optional[str]:
    """Label of the nearest reference point within ``tol``, else ``None``."""
    x = np.asarray(x, dtype=float)
    best, best_d = None, math.inf
    for label, ref in references.items():
        d = float(np.linalg.norm(x - np.asarray(ref, dtype=float)))
        if d < best_d:
            best, best_d = label, d
    return best if best_d <= tol else None


def cluster_limit_points(points: Sequence, radius=1e-3):
    """Greedy clustering in input order; returns ``[(center, member indices)]``."""
    clusters = []
    for idx, p in enumerate(points):
        p = np.asarray(p, dtype=float)
        for center, members in clusters:
            if np.linalg.norm(p - center) <= radius:
                members.append(idx)
                break
        else:
            clusters.append((p.copy(), [idx]))
    out = []
    for _, members in clusters:
        center = np.mean([np.asarray(points[i], dtype=float) for i in members], axis=0)
        out.append((center, members))
    return out
