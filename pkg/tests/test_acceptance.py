"""Acceptance suite: one PASS/FAIL line per criterion.

Slow: the k = 4 search and the truncated k = 5 run take tens of minutes.
Run alone with ``python3 tests/test_acceptance.py``.
"""

import functools
import gc
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from osearch.certify import Verdict, refine_loop
from osearch.driver import cmd_maxn, cmd_rate, postprocess
from osearch.sdpa import build_clp_sdp, solve_sdpa

ROOT = Path(__file__).resolve().parents[1]

pytestmark = pytest.mark.slow


def report(capsys, num, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, detail


@functools.lru_cache(maxsize=None)
def search(k):
    return cmd_maxn(k)


@functools.lru_cache(maxsize=None)
def factored(n, k):
    """FEASIBLE certificate at ``(n, k)`` taken from the search, then factored and simulated."""
    res = search(k)
    assert res.n_max == n, f"search for k={k} ended at {res.n_max}"
    return postprocess(res.feasible_cert)


def test_criterion_1_small_k(capsys):
    r1, r3 = search(1), search(3)
    ok = (
        r1.n_max == 2
        and r3.n_max == 56
        and r3.feasible_cert.n == 56
        and r3.feasible_cert.verdict is Verdict.FEASIBLE
        and r3.infeasible_cert.n == 57
        and r3.infeasible_cert.verdict is Verdict.INFEASIBLE
    )
    report(capsys, 1, ok, f"maxn(1)={r1.n_max} maxn(3)={r3.n_max} (56 {r3.feasible_cert.verdict.value}, 57 {r3.infeasible_cert.verdict.value})")


def test_criterion_2_four_queries(capsys):
    r4 = search(4)
    f, i = r4.feasible_cert, r4.infeasible_cert
    ok = r4.n_max == 605 and (f.n, f.verdict) == (605, Verdict.FEASIBLE) and (i.n, i.verdict) == (606, Verdict.INFEASIBLE)
    secs = sum(s for _, _, s in r4.probe_log)
    report(capsys, 2, ok, f"maxn(4)={r4.n_max} ({f.n} {f.verdict.value}, {i.n} {i.verdict.value}; {len(r4.probe_log)} probes, {secs:.0f}s)")


@pytest.mark.parametrize("n,k", [(2, 1), (56, 3), (605, 4)])
def test_criterion_4_feasible_certificates(capsys, n, k):
    cert = factored(n, k)
    sdp, sim = cert.sdp_report, cert.simulation
    res = max([sdp["initial_residual"], sdp["final_residual"], *sdp["forward_residuals"], *sdp["trace_residuals"]])
    psd = min(sdp["psd_margins"])
    probs = np.asarray(sim["probabilities"])
    ok = res <= 1e-8 and psd >= -1e-9 and probs.size == 2 * n and sim["min_success"] >= 1 - 1e-6
    report(
        capsys, 4, ok,
        f"n={n}: factors={cert.factor_method.split(',')[1]} max residual {res:.2e}, min eig {psd:.2e}, min success {sim['min_success']:.12f} over {probs.size} inputs",
    )


def test_criterion_5_rates(capsys):
    r5, r4 = cmd_rate(5, 7265), cmd_rate(4, 605)
    ok = abs(r5 - 0.390) <= 0.001 and abs(r4 - 0.433) <= 0.001
    report(capsys, 5, ok, f"rate(5,7265)={r5:.4f} rate(4,605)={r4:.4f}")


PROPERTY_TESTS = {
    "round trip, n <= 64, 200 cases": "tests/test_spectral.py::test_round_trip_from_disk_roots",
    "DFT vs matrix forward, 600 cases": "tests/test_constraints.py::test_residual_matches_pointwise_equality",
    "LP monotonicity, 50 cases": "tests/test_lp.py::test_refining_a_grid_never_raises_beta",
    "unitarity": "tests/test_simulator.py::test_unitarity",
    "translation invariance": "tests/test_simulator.py::test_translation_invariance",
    "parity flow": "tests/test_simulator.py::test_parity_flow",
    "monotonicity sweep k <= 3": "tests/test_driver.py::test_feasibility_is_monotone",
    "initial-step uniqueness, 1000 samples": "tests/test_spectral.py::test_random_feasible_points_collapse_to_uniform",
    "J/n accepted": "tests/test_spectral.py::test_uniform_initial_is_unique",
}


@pytest.mark.parametrize("name", list(PROPERTY_TESTS))
def test_criterion_6_properties(capsys, name):
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", PROPERTY_TESTS[name]],
        cwd=ROOT,
        capture_output=True,
        text=True,
    )
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(capsys, 6, proc.returncode == 0, f"{name}: {tail}")


@pytest.mark.parametrize("n,k", [(2, 1), (10, 2), (56, 3)])
def test_criterion_7_conic_cross_check(capsys, n, k):
    conic = solve_sdpa(build_clp_sdp(n, k, 0.0))
    lp = refine_loop(n, k).verdict
    ok = conic.feasible is not None and conic.feasible is (lp is Verdict.FEASIBLE)
    report(capsys, 7, ok, f"(n,k)=({n},{k}) LP {lp.value}, conic {conic.status} objective {conic.objective:.9f}")


def test_criterion_3_truncated_five_queries(capsys, tmp_path):
    # separate process: the k = 5 LP peaks near 4 GB, so drop the cached
    # searches first (this test runs last for that reason)
    search.cache_clear()
    factored.cache_clear()
    gc.collect()
    proc = subprocess.run(
        [sys.executable, str(ROOT / "scripts" / "k5_checkpoint_demo.py"), "--first", "2", "--then", "1", "--ckpt", str(tmp_path / "k5.ckpt.json")],
        capture_output=True,
        text=True,
        timeout=7200,
    )
    if proc.returncode != 0:
        report(capsys, 3, False, f"demo exited {proc.returncode}: {proc.stderr[-400:]}")
    s = json.loads(proc.stdout.strip().splitlines()[-1])
    ok = s["iterations"] >= 3 and s["first_iterations"] == 2 and s["non_increasing"] and not s["numerical_failure"]
    beta = ", ".join(f"{b:.3e}" for b in s["beta_star"])
    report(capsys, 3, ok, f"n=7265 k=5: {s['iterations']} iterations across a resume, beta*=[{beta}], reason={s['reason']!r}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
