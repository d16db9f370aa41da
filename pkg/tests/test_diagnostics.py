import json

import numpy as np
import pytest

from iprox.artifacts import _clean
from iprox.core import OuterParams, PrimalDualPair
from iprox.diagnostics import (
    assign_basin,
    build_kkt_report,
    cluster_limit_points,
    dual_certificate,
)
from iprox.outer import ip_solve, kkt_exit_test
from iprox.problems import ROSENBROCK_CENTER, ROSENBROCK_MINIMIZERS, ROSENBROCK_RADIUS

from conftest import smooth_spec

STARTS = {"x1": (-0.647, 0.72), "x2": (0.0, 1.05), "x3": (-0.8, 0.25)}


@pytest.fixture(scope="module")
def runs(rb, barrier):
    return {k: ip_solve(rb, barrier, np.array(x0)) for k, x0 in STARTS.items()}


def _geometric_active(x, eps_p):
    # |c| = |r^2 - d^2| = |r - d| (r + d)
    d = float(np.hypot(*(np.asarray(x) - ROSENBROCK_CENTER)))
    r = ROSENBROCK_RADIUS
    return abs(d - r) * (d + r) <= 10 * eps_p


def test_reports_match_geometry(rb, runs):
    outer = OuterParams()
    for label, res in runs.items():
        assert assign_basin(res.x, ROSENBROCK_MINIMIZERS) == label
        rep = build_kkt_report(res.pair, rb, outer)
        assert rep.certified and rep.classification == "eps-KKT certified"
        assert rep.rows[0].active == _geometric_active(res.x, outer.eps_p)
        assert rep.rows[0].active == (label != "x3")
        if label == "x2":
            assert rep.rows[0].y > 0
        assert rep.dual_certificate_norm <= rep.dual_bound


def test_classification_matches_exit_predicate(rb, runs):
    outer = OuterParams()
    for res in runs.values():
        for rec in res.history:
            pair = PrimalDualPair(
                rec.x, rec.y, rec.eps_k, rec.primal_residual, rec.inner_residual, rec.residual_vector
            )
            rep = build_kkt_report(pair, rb, outer)
            assert rep.certified == kkt_exit_test(rec.eps_k, rb.c_eval(rec.x), rec.y, outer)
        assert build_kkt_report(res.pair, rb, outer).certified == res.converged


def test_primal_residual_first_vs_last(runs):
    for res in runs.values():
        col = res.trace.columns()[:, 5]
        assert col[-1] <= col[0]


def test_artificial_inactive_pair():
    spec = smooth_spec(c=lambda z: np.array([-1.0]))
    outer = OuterParams()
    for bound, expect in [(1e-6, True), (1e-5, True), (2e-5, False)]:
        pair = PrimalDualPair(np.array([0.0]), np.array([0.0]), bound, 0.0)
        rep = build_kkt_report(pair, spec, outer)
        assert rep.rows[0].complementarity == 0.0
        assert rep.certified is expect
        assert not rep.rows[0].active


def test_dual_certificate_without_residual():
    spec = smooth_spec()
    pair = PrimalDualPair(np.array([0.0]), np.array([1.0]), 1e-5, 0.0)
    v, bound = dual_certificate(spec, pair)
    assert v is None and np.isnan(bound)


def test_report_serializes(rb, runs):
    d = build_kkt_report(runs["x2"].pair, rb, OuterParams()).to_dict()
    text = json.dumps(_clean(d))
    assert json.loads(text)["constraints"][0]["index"] == 0


def test_assign_basin():
    refs = {"a": (0.0, 0.0), "b": (1.0, 0.0)}
    assert assign_basin((0.004, 0.0), refs) == "a"
    assert assign_basin((0.996, 0.0), refs) == "b"
    assert assign_basin((0.5, 0.0), refs) is None


def test_cluster_limit_points():
    pts = [(0, 0), (1, 1), (0, 1e-4), (1, 1 + 2e-4), (5, 5)]
    clusters = cluster_limit_points(pts, radius=1e-3)
    assert [m for _, m in clusters] == [[0, 2], [1, 3], [4]]
    np.testing.assert_allclose(clusters[0][0], [0, 5e-5])
