"""Cutting-plane refinement of the grid and rigorous nonnegativity checks.

Each round solves the grid LP, locates every local extremum of the interior
polynomials on [-1, 1] (in ``x = cos theta``), and adds the angles where a
polynomial dips below zero.  The loop stops when

* the LP optimum drops below ``-delta_neg`` (no nonnegative tuple exists),
* no negative extremum remains and every interior polynomial is certified
  strictly positive, or
* a cap is hit or the optimum lingers in ``[-delta_neg, 0)``.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.polynomial import chebyshev as C

from ._io import atomic_write_json, read_json
from .constraints import ConstraintSystem, build_system, forward_residual
from .lp import DEDUP_TOL, Grid, LPSession, LPStatus, LPTolerances, initial_grid
from .poly import SymLaurentPoly, evaluate_precise, to_cheb

log = logging.getLogger(__name__)

ROOT_TOL = 1e-11
LOCAL_DEGREE = 512
IMAG_TOL = 1e-6


class RootFindingError(RuntimeError):
    pass


class Verdict(str, enum.Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    INCONCLUSIVE = "INCONCLUSIVE"


class CriticalPoints(NamedTuple):
    x: np.ndarray
    values: np.ndarray

    def __len__(self):
        return self.x.size


# ---------------------------------------------------------------- root finding


def _real_roots_global(coef, tol_imag=IMAG_TOL):
    if coef.size < 2 or not np.any(coef[1:]):
        return np.zeros(0)
    coef = np.trim_zeros(coef, "b")
    if coef.size < 2:
        return np.zeros(0)
    r = C.chebroots(coef)
    r = r[np.abs(r.imag) <= tol_imag].real
    return r[(r >= -1 - 1e-9) & (r <= 1 + 1e-9)]


def _interp_on(db, a, b, deg):
    # Chebyshev interpolant of chebval(., db) on [a, b] at first-kind extrema
    k = np.arange(deg + 1)
    u = np.cos(np.pi * k / deg)
    x = 0.5 * (a + b) + 0.5 * (b - a) * u
    f = C.chebval(x, db)
    return _vals_to_coeffs(f), f


def _vals_to_coeffs(f):
    # values at cos(pi k / N), k = 0..N  ->  Chebyshev coefficients (DCT-I)
    N = f.size - 1
    ext = np.concatenate((f, f[-2:0:-1]))
    c = np.fft.rfft(ext).real / N
    c[0] /= 2
    c[N] /= 2
    return c[: N + 1]


def _real_roots_piecewise(db, max_depth=12):
    deg = db.size - 1
    pieces = max(1, int(np.ceil(deg / (LOCAL_DEGREE / 4))))
    edges = np.cos(np.linspace(np.pi, 0.0, pieces + 1))
    # rounding in chebval grows with the degree near x = +-1
    scale = float(np.sum((np.arange(deg + 1) + 1.0) * np.abs(db)))
    out = []
    stack = [(edges[i], edges[i + 1], 0) for i in range(pieces)]
    while stack:
        a, b, depth = stack.pop()
        c, f = _interp_on(db, a, b, LOCAL_DEGREE)
        tail = np.max(np.abs(c[-8:]))
        head = max(np.max(np.abs(f)), 1e-300)
        # below ~100 ulps of the evaluation error bound the tail is rounding noise
        if tail > max(1e-13 * head, 100 * np.finfo(float).eps * scale):
            if depth >= max_depth:
                raise RootFindingError(
                    f"derivative not resolved on [{a:.6g}, {b:.6g}] after {depth} subdivisions (tail {tail:.3e})"
                )
            m = 0.5 * (a + b)
            stack += [(a, m, depth + 1), (m, b, depth + 1)]
            continue
        big = np.nonzero(np.abs(c) > 1e-13 * np.max(np.abs(c)))[0]
        r = _real_roots_global(c[: big[-1] + 1] if big.size else c[:1])
        out.append(0.5 * (a + b) + 0.5 * (b - a) * r)
    return np.concatenate(out) if out else np.zeros(0)


def _polish(x, db, d2b, iters=30):
    x = x.copy()
    for _ in range(iters):
        f = C.chebval(x, db)
        fp = C.chebval(x, d2b)
        ok = fp != 0
        step = np.zeros_like(x)
        step[ok] = f[ok] / fp[ok]
        # do not let a wild Newton step carry a root across the interval
        step = np.clip(step, -1e-3, 1e-3)
        x = np.clip(x - step, -1.0, 1.0)
        if np.all(np.abs(step) <= 1e-16 * np.maximum(1.0, np.abs(x))):
            break
    return x


def derivative_roots(q: SymLaurentPoly) -> np.ndarray:
    """Real roots in [-1, 1] of ``Q'(x)`` where ``Q(cos theta) = q(e^{i theta})``."""
    b = to_cheb(q).cheb_coeffs
    if b.size < 3:
        return np.zeros(0)
    db = C.chebder(b)
    if not np.any(db):
        return np.zeros(0)
    if db.size - 1 <= LOCAL_DEGREE:
        r = _real_roots_global(db)
    else:
        r = _real_roots_piecewise(db)
    if r.size == 0:
        return r
    r = _polish(np.clip(r, -1.0, 1.0), db, C.chebder(db))
    scale = float(np.sum(np.abs(db)) + np.sum(np.abs(C.chebder(db))))
    resid = np.abs(C.chebval(r, db))
    bad = resid > ROOT_TOL * scale
    if np.any(bad):
        # a spurious near-real eigenvalue only adds a harmless extra sample;
        # keep it, but tell the caller
        log.debug("%d derivative roots above residual tolerance (max %.3e)", int(bad.sum()), float(resid.max()))
    return np.sort(r)


def critical_points(q: SymLaurentPoly) -> CriticalPoints:
    """Stationary points of ``Q`` on [-1, 1] plus both endpoints, with compensated values."""
    r = derivative_roots(q)
    x = np.unique(np.concatenate((r, [-1.0, 1.0])))
    vals = evaluate_precise(q, np.arccos(x))
    return CriticalPoints(x, vals)


def negative_minima(polys, tol: float = DEDUP_TOL) -> np.ndarray:
    """Angles of every critical or boundary point where some polynomial is negative."""
    th = []
    for q in polys:
        cp = critical_points(q)
        neg = cp.values < 0
        th.append(np.arccos(cp.x[neg]))
    if not th:
        return np.zeros(0)
    return Grid.from_angles(np.concatenate(th), tol).thetas if any(a.size for a in th) else np.zeros(0)


def _negative_with_values(polys):
    th, vals = [], []
    for q in polys:
        cp = critical_points(q)
        neg = cp.values < 0
        th.append(np.arccos(cp.x[neg]))
        vals.append(cp.values[neg])
    if not th:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(th), np.concatenate(vals)


class NonnegReport(NamedTuple):
    min_value: float
    argmin_x: float
    passed: bool
    reason: str = ""


def certify_nonnegative(q: SymLaurentPoly, delta_pos: float = 0.0) -> NonnegReport:
    try:
        cp = critical_points(q)
    except (RootFindingError, np.linalg.LinAlgError) as exc:
        return NonnegReport(float("nan"), float("nan"), False, f"root finding failed: {exc}")
    i = int(np.argmin(cp.values))
    mv = float(cp.values[i])
    ok = bool(mv > delta_pos)
    return NonnegReport(mv, float(cp.x[i]), ok, "" if ok else f"minimum {mv:.3e} at x={cp.x[i]:.12g}")


def max_forward_residual(polys) -> float:
    out = 0.0
    for t in range(1, len(polys)):
        out = max(out, float(np.max(np.abs(forward_residual(polys[t].coeffs, polys[t - 1].coeffs, t)))))
    return out


# ---------------------------------------------------------------- the loop


@dataclass
class RefineConfig:
    max_iters: int = 200  # per call: a resumed run gets a fresh budget
    time_limit: float | None = None
    delta_neg: float = 1e-7
    delta_pos: float = 0.0
    eps_eq: float = 1e-8
    tau_dedup: float = DEDUP_TOL
    primal_tol: float = 1e-9
    gap_tol: float = 1e-9
    solver: str = "highs"
    eliminate: bool = True
    initial_points: int | None = None
    max_new_points: int | None = None
    checkpoint: str | None = None

    def lp_tolerances(self) -> LPTolerances:
        return LPTolerances(self.primal_tol, self.gap_tol)

    def tolerance_block(self) -> dict:
        return {
            "delta_neg": self.delta_neg,
            "delta_pos": self.delta_pos,
            "eps_eq": self.eps_eq,
            "tau_dedup": self.tau_dedup,
            "tau_root": ROOT_TOL,
            "lp_primal": self.primal_tol,
            "lp_gap": self.gap_tol,
        }


@dataclass
class Certificate:
    verdict: Verdict
    n: int
    k: int
    epsilon: float = 0.0
    polys: tuple | None = None
    grid: Grid | None = None
    beta_star: float | None = None
    beta_lp: float | None = None
    margins: dict = field(default_factory=dict)
    iterations: int = 0
    tolerances: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    reason: str = ""
    forward_residual: float | None = None
    solver: dict = field(default_factory=dict)
    factors: tuple | None = None
    factor_method: str | None = None
    simulation: dict | None = None
    sdp_report: dict | None = None


def save_checkpoint(path, n, k, grid: Grid, iteration: int, history, config: RefineConfig) -> None:
    atomic_write_json(
        path,
        {
            "kind": "osearch-checkpoint",
            "n": n,
            "k": k,
            "iteration": iteration,
            "grid": [float(t) for t in grid.thetas],
            "history": history,
            "config": {k_: v for k_, v in asdict(config).items() if k_ != "checkpoint"},
        },
    )


def load_checkpoint(path) -> dict:
    d = read_json(path)
    if d.get("kind") != "osearch-checkpoint":
        raise ValueError(f"{path} is not a refinement checkpoint")
    d["grid"] = Grid(np.asarray(d["grid"], dtype=float))
    return d


def _pick_new(th, vals, grid: Grid, cap, tol):
    fresh = grid.new_points(th, tol)
    if cap is None or fresh.size <= cap:
        return fresh
    # most negative first
    order = np.argsort(vals)
    chosen = []
    seen = grid
    for i in order:
        pt = seen.new_points([th[i]], tol)
        if pt.size:
            chosen.append(pt[0])
            seen = seen.union(pt, tol)
            if len(chosen) >= cap:
                break
    return np.sort(np.asarray(chosen))


def refine_loop(
    n: int,
    k: int,
    G0: Grid | None = None,
    config: RefineConfig | None = None,
    resume: dict | str | Path | None = None,
    on_iteration=None,
) -> Certificate:
    """Run grid refinement for ``(n, k)`` and return a certificate.

    ``resume`` takes a checkpoint (path or loaded dict); its grid replaces
    ``G0`` and its history and iteration count carry over.
    """
    cfg = config or RefineConfig()
    t_start = time.perf_counter()
    sys: ConstraintSystem = build_system(n, k, eliminate=cfg.eliminate)
    history: list = []
    it0 = 0
    if resume is not None:
        ck = load_checkpoint(resume) if not isinstance(resume, dict) else resume
        if (ck["n"], ck["k"]) != (n, k):
            raise ValueError(f"checkpoint is for (n, k) = ({ck['n']}, {ck['k']})")
        G = ck["grid"]
        history = list(ck.get("history", []))
        it0 = int(ck["iteration"])
    else:
        G = G0 if G0 is not None else initial_grid(n, cfg.initial_points)

    base = dict(n=n, k=k, tolerances=cfg.tolerance_block())

    if sys.contradictory:
        worst = float(np.max(np.abs(sys.eq_b)))
        return Certificate(
            Verdict.INFEASIBLE, grid=G, iterations=it0, history=history,
            reason=f"contradictory equality rows (max |rhs| = {worst:.6g})", **base,
        )

    tol = cfg.lp_tolerances()
    session = LPSession(sys, G, cfg.solver, tol)
    escalated = False
    out = None
    it = it0
    while True:
        if it - it0 >= cfg.max_iters:
            return _stop(Verdict.INCONCLUSIVE, "iteration cap reached", session, out, it, history, base)
        if cfg.time_limit is not None:
            left = cfg.time_limit - (time.perf_counter() - t_start)
            if left <= 0:
                return _stop(Verdict.INCONCLUSIVE, "time limit reached", session, out, it, history, base)
            tol = LPTolerances(tol.primal, tol.gap, left)
        out = session.solve(tol)
        if out.status is not LPStatus.OPTIMAL:
            return _stop(
                Verdict.INCONCLUSIVE, f"LP backend: {out.status.value} {out.solver_stats.get('message', '')}".strip(),
                session, out, it, history, base,
            )
        beta = out.beta_lp
        if beta < -cfg.delta_neg:
            _record(history, it, out, session, 0)
            return _stop(Verdict.INFEASIBLE, f"grid optimum {beta:.6e} below -delta_neg", session, out, it + 1, history, base)
        if beta < 0 and not escalated:
            escalated = True
            tol = tol.escalated()
            log.info("iter=%d beta=%.6e in gray zone, re-solving with tolerances %.1e", it, beta, tol.primal)
            continue

        interior = [out.polys[t] for t in sys.intermediate]
        try:
            th, vals = _negative_with_values(interior)
        except RootFindingError as exc:
            return _stop(Verdict.INCONCLUSIVE, f"root finding failed: {exc}", session, out, it, history, base)
        new = _pick_new(th, vals, session.grid, cfg.max_new_points, cfg.tau_dedup)
        _record(history, it, out, session, new.size)
        it += 1

        if new.size == 0:
            if beta < 0:
                return _stop(Verdict.INCONCLUSIVE, f"optimum {beta:.3e} stuck in [-delta_neg, 0)", session, out, it, history, base)
            return _finish_feasible(sys, session, out, it, history, base, cfg)

        session.add_points(new)
        if cfg.checkpoint:
            save_checkpoint(cfg.checkpoint, n, k, session.grid, it, history, cfg)
        if on_iteration is not None:
            on_iteration(it, out, session.grid)


def _record(history, it, out, session, m):
    entry = {
        "iter": it,
        "beta": out.beta_star,
        "beta_lp": out.beta_lp,
        "grid": len(session.grid),
        "new_pts": int(m),
        "lp_seconds": out.solver_stats.get("seconds"),
    }
    history.append(entry)
    log.info("iter=%d beta=%.6e |G|=%d new_pts=%d", it, out.beta_star, len(session.grid), m)


def _stop(verdict, reason, session, out, it, history, base):
    solved = out is not None and out.status is LPStatus.OPTIMAL
    return Certificate(
        verdict,
        grid=session.grid,
        beta_star=out.beta_star if solved else None,
        beta_lp=out.beta_lp if solved else None,
        polys=out.polys if solved and verdict is not Verdict.INFEASIBLE else None,
        iterations=it,
        history=history,
        reason=reason,
        solver=_solver_meta(out),
        **base,
    )


def _solver_meta(out):
    if out is None:
        return {}
    return {k: v for k, v in out.solver_stats.items() if isinstance(v, (int, float, str))}


def _finish_feasible(sys, session, out, it, history, base, cfg):
    margins = {}
    failures = []
    for t in sys.intermediate:
        rep = certify_nonnegative(out.polys[t], cfg.delta_pos)
        margins[t] = rep.min_value
        if not rep.passed:
            failures.append(f"q_{t}: {rep.reason}")
    fres = max_forward_residual(out.polys)
    cert = Certificate(
        Verdict.FEASIBLE,
        polys=out.polys,
        grid=session.grid,
        beta_star=out.beta_star,
        beta_lp=out.beta_lp,
        margins=margins,
        iterations=it,
        history=history,
        forward_residual=fres,
        solver=_solver_meta(out),
        **base,
    )
    if failures:
        cert.verdict = Verdict.INCONCLUSIVE
        cert.reason = "certification failed: " + "; ".join(failures)
    elif fres > cfg.eps_eq:
        cert.verdict = Verdict.INCONCLUSIVE
        cert.reason = f"forward residual {fres:.3e} above eps_eq"
    return cert
