import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osearch.certify import (
    RefineConfig,
    Verdict,
    certify_nonnegative,
    critical_points,
    derivative_roots,
    load_checkpoint,
    negative_minima,
    refine_loop,
)
from osearch.constraints import build_system
from osearch.lp import Grid, LPSession, initial_grid
from osearch.poly import SymLaurentPoly, evaluate_uniform, fejer_kernel


def dense_min(q, m=100_000):
    return float(np.min(evaluate_uniform(q, m)[1]))


# ---------------------------------------------------------------- critical points


def test_constant_has_only_endpoints():
    cp = critical_points(SymLaurentPoly.constant(4))
    assert cp.x.tolist() == [-1.0, 1.0]
    assert cp.values.tolist() == [1.0, 1.0]


def test_linear_has_only_endpoints():
    cp = critical_points(SymLaurentPoly([0.0, 1.0]))
    assert cp.x.tolist() == [-1.0, 1.0]
    np.testing.assert_allclose(cp.values, [-2.0, 2.0], atol=1e-15)


def test_fejer4_touches_zero():
    cp = critical_points(fejer_kernel(4))
    assert np.all(cp.values >= -1e-12)
    assert np.min(cp.values) == pytest.approx(0.0, abs=1e-12)
    assert dense_min(fejer_kernel(4)) >= -1e-12


def test_high_degree_uses_subdivision():
    # degree 1500 forces the piecewise path; compare with a dense scan
    rng = np.random.default_rng(7)
    c = rng.normal(size=1500) / np.arange(1, 1501)
    c[0] = 1.0
    q = SymLaurentPoly(c)
    cp = critical_points(q)
    assert np.min(cp.values) <= dense_min(q, 1 << 18) + 1e-12
    assert np.all(np.diff(cp.x) > 0)


@settings(max_examples=60)
@given(st.integers(2, 80), st.integers(0, 2**32 - 1))
def test_critical_minimum_matches_dense_scan(n, seed):
    rng = np.random.default_rng(seed)
    q = SymLaurentPoly(np.r_[1.0, rng.normal(size=n - 1) / np.arange(1, n)])
    cp = critical_points(q)
    scan = dense_min(q, 20_000)
    # the critical set contains the true minimizer, so it can only be lower
    assert np.min(cp.values) <= scan + 1e-12
    assert np.min(cp.values) >= scan - 1e-3 * (1 + np.sum(np.abs(q.coeffs)))


def test_derivative_roots_are_roots():
    q = SymLaurentPoly(np.r_[1.0, np.random.default_rng(0).normal(size=30)])
    from numpy.polynomial import chebyshev as C

    from osearch.poly import to_cheb

    db = C.chebder(to_cheb(q).cheb_coeffs)
    r = derivative_roots(q)
    assert r.size > 0
    assert np.max(np.abs(C.chebval(r, db))) <= 1e-9 * np.sum(np.abs(db))


# ---------------------------------------------------------------- negative minima


def test_no_negative_minima():
    assert negative_minima((SymLaurentPoly.constant(5), SymLaurentPoly([1.0, 0.3]))).size == 0


def test_endpoint_minimum():
    np.testing.assert_allclose(negative_minima((SymLaurentPoly.constant(2), SymLaurentPoly([0.0, 1.0]))), [np.pi])


def test_interior_minimum_of_t2():
    np.testing.assert_allclose(negative_minima((SymLaurentPoly([0.0, 0.0, 0.5]),)), [np.pi / 2], atol=1e-12)


# ---------------------------------------------------------------- certification


def test_certify_constant():
    rep = certify_nonnegative(SymLaurentPoly.constant(3))
    assert rep.passed and rep.min_value == 1.0


@pytest.mark.parametrize("n", [2, 3, 8, 33, 64])
def test_fejer_is_never_certified(n):
    rep = certify_nonnegative(fejer_kernel(n))
    assert rep.min_value >= -1e-12
    assert not rep.passed


def test_certify_reports_negative_minimum():
    rep = certify_nonnegative(SymLaurentPoly([1.0, 0.6]))
    assert not rep.passed
    assert rep.min_value == pytest.approx(-0.2)
    assert rep.argmin_x == pytest.approx(-1.0)


def test_certify_margin_threshold():
    q = SymLaurentPoly([1.0, 0.25])
    assert certify_nonnegative(q).passed
    assert not certify_nonnegative(q, delta_pos=0.6).passed


# ---------------------------------------------------------------- refinement


def test_refine_two_one(certs):
    assert certs(2, 1).verdict is Verdict.FEASIBLE


def test_refine_three_one():
    cert = refine_loop(3, 1)
    assert cert.verdict is Verdict.INFEASIBLE
    assert "contradictory" in cert.reason


@pytest.mark.parametrize("n,k,verdict", [(6, 2, "FEASIBLE"), (7, 2, "INFEASIBLE"), (56, 3, "FEASIBLE"), (57, 3, "INFEASIBLE")])
def test_refine_known_instances(certs, n, k, verdict):
    assert certs(n, k).verdict.value == verdict


@pytest.mark.parametrize("n,k", [(6, 2), (20, 3), (56, 3), (57, 3), (40, 4)])
def test_refine_history_invariants(certs, n, k):
    cert = certs(n, k)
    betas = [h["beta_lp"] for h in cert.history]
    assert all(b2 <= b1 + 1e-9 for b1, b2 in zip(betas, betas[1:]))
    sizes = [h["grid"] for h in cert.history]
    # every non-terminal iteration strictly grows the grid
    for h, nxt in zip(cert.history, cert.history[1:]):
        assert h["new_pts"] > 0 and nxt["grid"] == h["grid"] + h["new_pts"]
    assert sizes[0] == 2 * n + 1


def test_feasible_invariants(certs):
    cert = certs(56, 3)
    assert all(m > 0 for m in cert.margins.values())
    assert cert.forward_residual <= 1e-8
    for t in (1, 2):
        # the declared margin is a true lower bound, up to rounding
        assert dense_min(cert.polys[t]) >= cert.margins[t] - 1e-9


def test_infeasible_grid_replays(certs):
    cert = certs(57, 3)
    out = LPSession(build_system(57, 3), Grid(np.array(cert.grid.thetas))).solve()
    assert out.beta_lp < -0.5e-7
    assert cert.beta_star < -1e-7


def test_iteration_cap_is_inconclusive():
    cert = refine_loop(56, 3, config=RefineConfig(max_iters=1))
    assert cert.verdict is Verdict.INCONCLUSIVE
    assert "iteration cap" in cert.reason


def test_time_limit_is_inconclusive():
    cert = refine_loop(56, 3, config=RefineConfig(time_limit=1e-9))
    assert cert.verdict is Verdict.INCONCLUSIVE


def test_checkpoint_and_resume(tmp_path, certs):
    ck = tmp_path / "ck.json"
    first = refine_loop(56, 3, config=RefineConfig(max_iters=2, checkpoint=str(ck)))
    assert first.verdict is Verdict.INCONCLUSIVE
    d = json.loads(ck.read_text())
    assert d["kind"] == "osearch-checkpoint" and d["iteration"] == 2
    assert len(load_checkpoint(ck)["grid"]) == first.history[-1]["grid"] + first.history[-1]["new_pts"]
    resumed = refine_loop(56, 3, resume=ck)
    straight = certs(56, 3)
    assert resumed.verdict is Verdict.FEASIBLE
    assert resumed.iterations == straight.iterations
    # a cold LP restart may move new points by an ulp
    np.testing.assert_allclose(resumed.grid.thetas, straight.grid.thetas, rtol=0, atol=1e-12)
    assert [h["iter"] for h in resumed.history] == list(range(resumed.iterations))


def test_resume_rejects_other_instance(tmp_path):
    ck = tmp_path / "ck.json"
    refine_loop(20, 3, config=RefineConfig(max_iters=1, checkpoint=str(ck)))
    with pytest.raises(ValueError):
        refine_loop(21, 3, resume=ck)


def test_simplex_backend_drives_refinement():
    a = refine_loop(12, 3, config=RefineConfig(solver="simplex"))
    b = refine_loop(12, 3)
    assert a.verdict is b.verdict
    assert a.beta_lp == pytest.approx(b.beta_lp, abs=1e-8)


def test_new_point_cap():
    cert = refine_loop(56, 3, G0=initial_grid(56, 16), config=RefineConfig(max_new_points=3, max_iters=3))
    assert all(h["new_pts"] <= 3 for h in cert.history)


def test_progress_log_format(caplog):
    import logging

    with caplog.at_level(logging.INFO, logger="osearch.certify"):
        refine_loop(6, 2)
    lines = [r.getMessage() for r in caplog.records if "new_pts=" in r.getMessage()]
    assert lines and all(len(l.split()) == 4 for l in lines)
    assert lines[0].split()[2].startswith("|G|=")
