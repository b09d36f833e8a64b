"""High-level commands: single-instance feasibility, the search for the largest
searchable ``n``, certificate re-verification, plotting and rates.

Exit codes: 0 FEASIBLE (or verification passed), 2 INFEASIBLE,
3 INCONCLUSIVE, 1 any error.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_json, atomic_write_text, read_json
from .certify import Certificate, RefineConfig, Verdict, refine_loop
from .constraints import build_system
from .lp import Grid, LPSession, LPStatus
from .poly import SymLaurentPoly, evaluate_precise, fejer_kernel
from .simulator import InvalidCertificateError, build_algorithm, success_report
from .spectral import FactorizationError, SpectralFactor, factor_tuple, verify_clp_solution

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT = {Verdict.FEASIBLE: 0, Verdict.INFEASIBLE: 2, Verdict.INCONCLUSIVE: 3}
EXIT_ERROR = 1
SCAN_POINTS = 100_000
SCAN_SLACK = 1e-9


class SchemaError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


# ---------------------------------------------------------------- certificate JSON


def _f(x):
    return None if x is None else float(x)


def certificate_to_dict(cert: Certificate) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "n": cert.n,
        "k": cert.k,
        "epsilon": cert.epsilon,
        "verdict": cert.verdict.value,
        "reason": cert.reason,
        "beta_star": _f(cert.beta_star),
        "beta_lp": _f(cert.beta_lp),
        "grid": None if cert.grid is None else [float(t) for t in cert.grid.thetas],
        "polys": None if cert.polys is None else [[float(c) for c in q.coeffs] for q in cert.polys],
        "factors": None if cert.factors is None else [p.to_pairs() for p in cert.factors],
        "factor_method": cert.factor_method,
        "margins": {str(t): float(v) for t, v in cert.margins.items()},
        "iterations": cert.iterations,
        "forward_residual": _f(cert.forward_residual),
        "history": cert.history,
        "simulation": cert.simulation,
        "sdp_report": cert.sdp_report,
        "solver": cert.solver,
        "tolerances": cert.tolerances,
    }


def certificate_from_dict(d: dict) -> Certificate:
    if not isinstance(d, dict):
        raise SchemaError("certificate must be a JSON object")
    if d.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {d.get('version')!r}")
    for key in ("n", "k", "verdict"):
        if key not in d:
            raise SchemaError(f"missing field {key!r}")
    try:
        verdict = Verdict(d["verdict"])
        n, k = int(d["n"]), int(d["k"])
        polys = None
        if d.get("polys") is not None:
            polys = tuple(SymLaurentPoly(np.asarray(c, dtype=float)) for c in d["polys"])
            if len(polys) != k + 1 or any(q.n != n for q in polys):
                raise SchemaError(f"expected {k + 1} coefficient arrays of length {n}")
        factors = None
        if d.get("factors") is not None:
            factors = tuple(SpectralFactor.from_pairs(p, d.get("factor_method") or "stored") for p in d["factors"])
            if len(factors) != k + 1 or any(p.n != n for p in factors):
                raise SchemaError(f"expected {k + 1} factor arrays of length {n}")
        grid = None if d.get("grid") is None else Grid(np.asarray(d["grid"], dtype=float))
    except SchemaError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise SchemaError(str(exc)) from exc
    return Certificate(
        verdict,
        n,
        k,
        epsilon=float(d.get("epsilon", 0.0)),
        polys=polys,
        grid=grid,
        beta_star=d.get("beta_star"),
        beta_lp=d.get("beta_lp"),
        margins={int(t): float(v) for t, v in (d.get("margins") or {}).items()},
        iterations=int(d.get("iterations", 0)),
        tolerances=d.get("tolerances") or {},
        history=d.get("history") or [],
        reason=d.get("reason", ""),
        forward_residual=d.get("forward_residual"),
        solver=d.get("solver") or {},
        factors=factors,
        factor_method=d.get("factor_method"),
        simulation=d.get("simulation"),
        sdp_report=d.get("sdp_report"),
    )


def write_certificate(cert: Certificate, path) -> None:
    atomic_write_json(path, certificate_to_dict(cert))


def read_certificate(path) -> Certificate:
    try:
        d = read_json(path)
    except ValueError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return certificate_from_dict(d)


# ---------------------------------------------------------------- feasible


def postprocess(cert: Certificate) -> Certificate:
    """Factor, check the SDP constraints and simulate a FEASIBLE certificate in place."""
    try:
        factors = factor_tuple(cert.polys)
    except FactorizationError as exc:
        raise StageError("spectral-factor", str(exc)) from exc
    cert.factors = factors
    cert.factor_method = ",".join(p.method for p in factors)
    rep = verify_clp_solution(factors, cert.epsilon)
    cert.sdp_report = rep.to_dict()
    if not rep.passed:
        raise StageError("sdp-verify", "; ".join(rep.failures))
    try:
        sim = success_report(build_algorithm(factors), cert.epsilon)
    except InvalidCertificateError as exc:
        raise StageError("simulate", str(exc)) from exc
    cert.simulation = sim.to_dict()
    if not sim.passed:
        raise StageError("simulate", f"min success {sim.min_success:.12g} below 1 - epsilon - {sim.eps_sim:g}")
    return cert


def cmd_feasible(k: int, n: int, epsilon: float = 0.0, config: RefineConfig | None = None, out=None, resume=None):
    """Return ``(certificate or None, exit code, message)``."""
    if k < 1 or n < 1:
        return None, EXIT_ERROR, "need k >= 1 and n >= 1"
    if epsilon != 0.0:
        return None, EXIT_ERROR, "only exact instances (epsilon = 0) can be decided by the LP pipeline"
    cfg = config or RefineConfig()
    try:
        cert = refine_loop(n, k, config=cfg, resume=resume)
    except Exception as exc:  # noqa: BLE001 - any failure is reported with its stage
        return None, EXIT_ERROR, f"refine: {exc}"
    msg = f"n={n} k={k} {cert.verdict.value}"
    if cert.reason:
        msg += f" ({cert.reason})"
    if cert.verdict is Verdict.FEASIBLE:
        try:
            postprocess(cert)
        except StageError as exc:
            if out is not None:
                write_certificate(cert, out)
            return cert, EXIT_ERROR, str(exc)
        msg += f" min_success={cert.simulation['min_success']:.12g}"
    if out is not None:
        write_certificate(cert, out)
    return cert, EXIT[cert.verdict], msg


# ---------------------------------------------------------------- maxn


@dataclass
class SearchResult:
    k: int
    n_max: int
    feasible_cert: Certificate
    infeasible_cert: Certificate
    probe_log: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_max": self.n_max,
            "probe_log": self.probe_log,
            "feasible": certificate_to_dict(self.feasible_cert),
            "infeasible": certificate_to_dict(self.infeasible_cert),
        }


class SearchAborted(RuntimeError):
    def __init__(self, message, probe_log, cert=None):
        super().__init__(message)
        self.probe_log = probe_log
        self.cert = cert


def cmd_maxn(k: int, lo: int = 2, hi: int | None = None, config: RefineConfig | None = None, probe=None) -> SearchResult:
    """Largest ``n`` with a FEASIBLE verdict, assuming feasibility is monotone in ``n``.

    ``lo`` is halved until feasible.  ``hi`` (default ``4^k``) is doubled
    while feasible, then the bracket is bisected.  ``probe(n)`` may replace
    the refine loop (used in tests).
    """
    if k < 1:
        raise ValueError("need k >= 1")
    hi = 4**k if hi is None else hi
    if lo > hi:
        raise ValueError("need lo <= hi")
    cfg = config or RefineConfig()
    run = probe or (lambda n_: refine_loop(n_, k, config=cfg))
    probe_log, seen = [], {}

    def verdict(n_):
        if n_ in seen:
            return seen[n_]
        t0 = time.perf_counter()
        cert = run(n_)
        dt = time.perf_counter() - t0
        probe_log.append((n_, cert.verdict.value, round(dt, 3)))
        log.info("probe n=%d %s %.1fs", n_, cert.verdict.value, dt)
        if cert.verdict is Verdict.INCONCLUSIVE:
            raise SearchAborted(f"INCONCLUSIVE at n={n_}: {cert.reason}", probe_log, cert)
        seen[n_] = cert
        return cert

    lo = max(lo, 1)
    while verdict(lo).verdict is not Verdict.FEASIBLE:
        if lo == 1:
            raise SearchAborted("n = 1 is not feasible", probe_log)
        hi, lo = lo, max(1, lo // 2)
    if hi == lo:
        hi = lo + 1
    while verdict(hi).verdict is Verdict.FEASIBLE:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if verdict(mid).verdict is Verdict.FEASIBLE:
            lo = mid
        else:
            hi = mid
    return SearchResult(k, lo, seen[lo], seen[hi], probe_log)


# ---------------------------------------------------------------- verify


@dataclass
class VerifyReport:
    passed: bool
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def fail(self, name, message):
        self.checks[name] = False
        self.failures.append(f"{name}: {message}")

    def ok(self, name):
        self.checks.setdefault(name, True)


def pointwise_forward_residual(q_prev: SymLaurentPoly, q: SymLaurentPoly, t: int) -> tuple[float, float]:
    """Compare ``q`` and ``q_prev`` at the ``n`` roots of ``z^n = (-1)^t``.

    Returns the largest pointwise gap and the coefficient residual recovered
    from the gaps by an inverse DFT.
    """
    n = q.n
    theta = (2 * np.arange(n) + (t % 2)) * np.pi / n
    gap = evaluate_precise(q, theta) - evaluate_precise(q_prev, theta)
    # r_j = (1/n) sum_m gap_m z_m^{-j}; with z_m = exp(i(2m+s)pi/n) this is a shifted DFT
    j = np.arange(n)
    r = np.exp(-1j * j * (t % 2) * np.pi / n) * np.fft.fft(gap) / n
    return float(np.max(np.abs(gap), initial=0.0)), float(np.max(np.abs(r), initial=0.0))


def verify_certificate(cert: Certificate, eps_eq: float = 1e-8, scan_points: int = SCAN_POINTS) -> VerifyReport:
    rep = VerifyReport(True)
    n, k = cert.n, cert.k
    if cert.verdict is Verdict.FEASIBLE:
        if cert.polys is None:
            rep.fail("schema", "FEASIBLE certificate without polynomials")
            rep.passed = False
            return rep
        P = cert.polys
        for t, q in enumerate(P):
            if abs(q.coeffs[0] - 1.0) > eps_eq:
                rep.fail("normalization", f"c_0 of q_{t} is {q.coeffs[0]!r}")
        rep.ok("normalization")
        if np.max(np.abs(P[0].coeffs - fejer_kernel(n).coeffs)) > eps_eq:
            rep.fail("endpoints", "q_0 is not the Fejer kernel")
        if np.max(np.abs(P[k].coeffs - SymLaurentPoly.constant(n).coeffs)) > eps_eq:
            rep.fail("endpoints", "q_k is not the constant 1")
        rep.ok("endpoints")
        for t in range(1, k + 1):
            _, r = pointwise_forward_residual(P[t - 1], P[t], t)
            if r > eps_eq:
                rep.fail("forward", f"step {t} residual {r:.3e}")
        rep.ok("forward")
        theta = np.linspace(0.0, np.pi, scan_points)
        for t in range(1, k):
            lo = float(np.min(evaluate_precise(P[t], theta)))
            declared = cert.margins.get(t)
            if declared is None or not declared > 0:
                rep.fail("nonnegativity", f"q_{t} declared margin {declared!r} is not positive")
            elif lo < declared - SCAN_SLACK:
                rep.fail("nonnegativity", f"q_{t} scan minimum {lo:.3e} below declared margin {declared:.3e}")
        rep.ok("nonnegativity")
        factors = cert.factors
        if factors is None:
            try:
                factors = factor_tuple(P)
            except FactorizationError as exc:
                rep.fail("spectral-factor", str(exc))
        if factors is not None:
            for t, (p, q) in enumerate(zip(factors, P)):
                d = float(np.max(np.abs(p.squared().coeffs - q.coeffs)))
                if d > eps_eq:
                    rep.fail("spectral-factor", f"|p_{t}|^2 differs from q_{t} by {d:.3e}")
            rep.ok("spectral-factor")
            sdp = verify_clp_solution(factors, cert.epsilon, eps_eq)
            for f in sdp.failures:
                rep.fail("sdp", f)
            rep.ok("sdp")
            try:
                sim = success_report(build_algorithm(factors, eps_eq), cert.epsilon)
                if not sim.passed:
                    rep.fail("simulation", f"min success {sim.min_success:.12g}")
            except InvalidCertificateError as exc:
                rep.fail("simulation", str(exc))
            rep.ok("simulation")
    elif cert.verdict is Verdict.INFEASIBLE:
        sys = build_system(n, k)
        if sys.contradictory:
            rep.ok("contradictory-rows")
        elif cert.grid is None:
            rep.fail("schema", "INFEASIBLE certificate without a grid")
        else:
            delta = float((cert.tolerances or {}).get("delta_neg", 1e-7))
            out = LPSession(sys, cert.grid).solve()
            if out.status is not LPStatus.OPTIMAL:
                rep.fail("grid-lp", f"replay LP status {out.status.value}")
            elif not out.beta_lp < -delta / 2:
                rep.fail("grid-lp", f"replayed optimum {out.beta_lp:.3e} not below -delta_neg/2")
            rep.ok("grid-lp")
    else:
        rep.fail("verdict", "INCONCLUSIVE certificates carry nothing to verify")
    rep.passed = not rep.failures
    return rep


def cmd_verify(path) -> tuple[int, str]:
    try:
        cert = read_certificate(path)
    except (OSError, SchemaError) as exc:
        return EXIT_ERROR, f"schema error: {exc}"
    if cert.verdict is Verdict.INCONCLUSIVE:
        return EXIT[Verdict.INCONCLUSIVE], "INCONCLUSIVE certificate: nothing to verify"
    rep = verify_certificate(cert)
    if rep.passed:
        return 0, f"PASS n={cert.n} k={cert.k} {cert.verdict.value} checks={sorted(rep.checks)}"
    return EXIT_ERROR, "check failed: " + "; ".join(rep.failures)


# ---------------------------------------------------------------- plot / rate


def coefficient_table(cert: Certificate) -> np.ndarray:
    """Columns ``j, q_0[j], ..., q_k[j]`` for ``j = 0..n-1``."""
    if cert.verdict is not Verdict.FEASIBLE or cert.polys is None:
        raise ValueError(f"refusing to plot a {cert.verdict.value} certificate")
    return np.column_stack([np.arange(cert.n)] + [q.coeffs for q in cert.polys])


def cmd_plot(cert_path, out_path) -> tuple[Path, Path]:
    """Write ``<out>.svg`` and ``<out>.csv``; returns both paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cert = cert_path if isinstance(cert_path, Certificate) else read_certificate(cert_path)
    tab = coefficient_table(cert)
    out = Path(out_path)
    svg, csv = out.with_suffix(".svg"), out.with_suffix(".csv")
    header = "j," + ",".join(f"q{t}" for t in range(cert.k + 1))
    rows = [",".join([str(int(r[0]))] + [repr(float(v)) for v in r[1:]]) for r in tab]
    atomic_write_text(csv, header + "\n" + "\n".join(rows) + "\n")
    fig, ax = plt.subplots(figsize=(7, 4))
    for t in range(cert.k + 1):
        ax.plot(tab[:, 0], tab[:, t + 1], lw=1.0, label=f"$q_{t}$")
    ax.set_xlabel("$j$")
    ax.set_ylabel("$c_j$")
    ax.set_title(f"n = {cert.n}, k = {cert.k}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg, format="svg")
    plt.close(fig)
    return svg, csv


def cmd_rate(k: int, n: int) -> float:
    if n < 2:
        raise ValueError("rate needs n >= 2")
    return k / math.log2(n)
