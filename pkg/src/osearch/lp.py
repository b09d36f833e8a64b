"""Grid-relaxed linear program over a constraint system.

For a finite grid ``G`` of angles in [0, pi] the program is

    maximize beta
    subject to q_t(e^{i theta}) >= beta   for theta in G, 0 <= t <= k,

with the polynomials parametrized affinely by the free variables of a
:class:`~osearch.constraints.ConstraintSystem`.  Only the interior
polynomials depend on the variables.  The rows for ``q_k = 1`` reduce to the
column bound ``beta <= 1``.  The rows for ``q_0 = F_n`` involve no variables,
so they are kept out of the solve and reported as ``fixed_bound``; the
optimum of the full program is ``beta_star = min(beta_lp, fixed_bound)``.
Keeping them out matters: ``F_n`` vanishes on the default grid, so folding
them in would pin every optimum at zero and hide how positive the interior
polynomials can be made.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .constraints import ConstraintSystem
from .poly import SymLaurentPoly, evaluate

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Grid:
    thetas: np.ndarray

    def __post_init__(self):
        th = np.array(self.thetas, dtype=float, copy=True).ravel()
        if th.size == 0:
            raise ValueError("grid must be non-empty")
        if np.any(~np.isfinite(th)) or np.any(th < 0) or np.any(th > np.pi):
            raise ValueError("grid angles must lie in [0, pi]")
        th = np.sort(th)
        if th.size > 1 and np.min(np.diff(th)) < DEDUP_TOL:
            raise ValueError("grid angles must be separated by at least the dedup tolerance")
        th.setflags(write=False)
        object.__setattr__(self, "thetas", th)

    def __len__(self):
        return self.thetas.size

    @classmethod
    def from_angles(cls, thetas, tol: float = DEDUP_TOL) -> "Grid":
        """Sort, clip to [0, pi], and merge angles closer than ``tol``."""
        th = np.clip(np.sort(np.asarray(thetas, dtype=float).ravel()), 0.0, np.pi)
        return cls(_dedup_sorted(th, tol))

    def new_points(self, thetas, tol: float = DEDUP_TOL) -> np.ndarray:
        """Angles from ``thetas`` that are not within ``tol`` of the grid or each other."""
        cand = np.clip(np.sort(np.asarray(thetas, dtype=float).ravel()), 0.0, np.pi)
        if cand.size == 0:
            return cand
        cand = _dedup_sorted(cand, tol)
        pos = np.searchsorted(self.thetas, cand)
        lo = np.abs(cand - self.thetas[np.clip(pos - 1, 0, len(self) - 1)])
        hi = np.abs(cand - self.thetas[np.clip(pos, 0, len(self) - 1)])
        return cand[np.minimum(lo, hi) >= tol]

    def union(self, thetas, tol: float = DEDUP_TOL) -> "Grid":
        add = self.new_points(thetas, tol)
        return Grid(np.concatenate((self.thetas, add))) if add.size else self


def _dedup_sorted(th, tol):
    if th.size == 0:
        return th
    keep = [0]
    for i in range(1, th.size):
        if th[i] - th[keep[-1]] >= tol:
            keep.append(i)
    return th[keep]


def initial_grid(n: int, points: int | None = None) -> Grid:
    """Uniform grid ``pi m / (2n)``, ``m = 0..2n``; or ``points`` equispaced angles."""
    if points is not None:
        return Grid(np.linspace(0.0, np.pi, max(2, int(points))))
    return Grid(np.linspace(0.0, np.pi, 2 * n + 1))


def eval_matrix(n: int, thetas) -> np.ndarray:
    """Rows ``(1, 2cos(theta), ..., 2cos((n-1)theta))``, i.e. ``T_j(cos theta)`` scaled to the c-convention."""
    th = np.asarray(thetas, dtype=float).ravel()
    W = 2.0 * np.cos(np.outer(th, np.arange(n)))
    W[:, 0] = 1.0
    return W


class LPStatus(str, enum.Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    NUMERICAL_TROUBLE = "NUMERICAL_TROUBLE"


@dataclass(frozen=True)
class LPTolerances:
    primal: float = 1e-9
    gap: float = 1e-9
    time_limit: float | None = None

    def escalated(self) -> "LPTolerances":
        return LPTolerances(self.primal * 1e-2, self.gap * 1e-2, self.time_limit)


def grid_rows(sys: ConstraintSystem, thetas) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """Inequality rows ``-W A_t x + beta <= W b_t`` for every interior ``t``.

    Returns the row matrix over ``(x, beta)``, right-hand sides, and labels
    ``(theta index, t)``.
    """
    th = np.asarray(thetas, dtype=float).ravel()
    m = sys.n_free
    W = eval_matrix(sys.n, th)
    blocks, rhs, labels = [], [], []
    for t in sys.intermediate:
        A_t, b_t = sys.maps[t]
        WA = np.asarray((A_t.T @ W.T).T) if m else np.zeros((th.size, 0))
        blocks.append(sp.csr_matrix(np.hstack((-WA, np.ones((th.size, 1))))))
        rhs.append(W @ b_t)
        labels.append(np.column_stack((np.arange(th.size), np.full(th.size, t))))
    if not blocks:
        return sp.csr_matrix((0, m + 1)), np.zeros(0), np.zeros((0, 2), dtype=int)
    return sp.vstack(blocks).tocsr(), np.concatenate(rhs), np.vstack(labels)


def fixed_bound(sys: ConstraintSystem, thetas) -> float:
    """``min`` over the grid of the two fixed endpoint polynomials."""
    return float(min(np.min(evaluate(sys.boundary_lo, thetas)), np.min(evaluate(sys.boundary_hi, thetas))))


@dataclass(frozen=True, eq=False)
class LPInstance:
    system: ConstraintSystem
    grid: Grid
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    beta_cap: float
    fixed_bound: float
    row_labels: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.system.n_free

    @property
    def contradictory(self) -> bool:
        return self.system.contradictory

    @property
    def var_names(self) -> tuple:
        return tuple(self.system.var_names) + ("b",)


def build_lp(sys: ConstraintSystem, G: Grid) -> LPInstance:
    A_ub, b_ub, labels = grid_rows(sys, G.thetas)
    m = sys.n_free
    A_eq = sp.hstack((sys.eq_A, sp.csr_matrix((sys.eq_A.shape[0], 1)))).tocsr()
    return LPInstance(
        system=sys,
        grid=G,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq if m or sys.eq_A.shape[0] else sp.csr_matrix((0, m + 1)),
        b_eq=np.asarray(sys.eq_b, dtype=float),
        beta_cap=float(np.min(sys.boundary_hi.coeffs[0] + 2 * np.sum(sys.boundary_hi.coeffs[1:]))),
        fixed_bound=fixed_bound(sys, G.thetas),
        row_labels=labels,
    )


@dataclass
class LPOutcome:
    status: LPStatus
    beta_star: float | None = None
    beta_lp: float | None = None
    polys: tuple | None = None
    x: np.ndarray | None = None
    solver_stats: dict = field(default_factory=dict)


@dataclass
class BackendResult:
    status: LPStatus
    z: np.ndarray | None
    iterations: int = 0
    message: str = ""
    info: dict = field(default_factory=dict)


class LPBackend:
    """Minimal backend contract: load, append rows, solve.

    ``z`` in a :class:`BackendResult` is the primal vector ``(x, beta)``.
    """

    name = "abstract"

    def load(self, inst: LPInstance) -> None:
        raise NotImplementedError

    def add_rows(self, A: sp.csr_matrix, b: np.ndarray) -> None:
        raise NotImplementedError

    def solve(self, tol: LPTolerances) -> BackendResult:
        raise NotImplementedError


class HighsBackend(LPBackend):
    """HiGHS dual simplex via ``highspy``; appended rows re-solve warm."""

    name = "highs"

    def __init__(self, solver: str = "simplex", threads: int | None = None):
        self.solver = solver
        self.threads = threads
        self._h = None

    def load(self, inst: LPInstance) -> None:
        import highspy

        if self._h is not None:
            # a rebuild must not hold two large models at once
            self._h.clearModel()
            self._h = None
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("solver", self.solver)
        if self.threads:
            h.setOptionValue("threads", self.threads)
        inf = highspy.kHighsInf
        m = inst.n_vars
        lb = np.full(m + 1, -inf)
        ub = np.full(m + 1, inf)
        ub[m] = inst.beta_cap
        h.addVars(m + 1, lb, ub)
        h.changeObjectiveSense(highspy.ObjSense.kMaximize)
        h.changeColCost(m, 1.0)
        self._h = h
        self._inf = inf
        if inst.A_eq.shape[0]:
            self._add(inst.A_eq, inst.b_eq, inst.b_eq)
        self.add_rows(inst.A_ub, inst.b_ub)

    def _add(self, A, lower, upper):
        A = sp.csr_matrix(A)
        if A.shape[0] == 0:
            return
        self._h.addRows(
            A.shape[0],
            np.asarray(lower, dtype=float),
            np.asarray(upper, dtype=float),
            A.nnz,
            A.indptr[:-1].astype(np.int32),
            A.indices.astype(np.int32),
            A.data.astype(float),
        )

    def add_rows(self, A, b) -> None:
        b = np.asarray(b, dtype=float)
        self._add(A, np.full(b.size, -self._inf), b)

    def solve(self, tol: LPTolerances) -> BackendResult:
        import highspy

        h = self._h
        h.setOptionValue("primal_feasibility_tolerance", tol.primal)
        h.setOptionValue("dual_feasibility_tolerance", tol.gap)
        h.setOptionValue("ipm_optimality_tolerance", tol.gap)
        # options persist on the model, so always reset the limit
        h.setOptionValue("time_limit", float(tol.time_limit) if tol.time_limit is not None else self._inf)
        h.run()
        ms = h.getModelStatus()
        info = h.getInfo()
        stats = {
            "simplex_iterations": int(info.simplex_iteration_count),
            "ipm_iterations": int(info.ipm_iteration_count),
            "max_primal_infeasibility": float(info.max_primal_infeasibility),
            "max_dual_infeasibility": float(info.max_dual_infeasibility),
            "time_limit": ms == highspy.HighsModelStatus.kTimeLimit,
        }
        its = stats["simplex_iterations"] + stats["ipm_iterations"]
        if ms == highspy.HighsModelStatus.kOptimal:
            z = np.array(h.getSolution().col_value, dtype=float)
            return BackendResult(LPStatus.OPTIMAL, z, its, "", stats)
        if ms == highspy.HighsModelStatus.kInfeasible:
            return BackendResult(LPStatus.INFEASIBLE, None, its, h.modelStatusToString(ms), stats)
        return BackendResult(LPStatus.NUMERICAL_TROUBLE, None, its, h.modelStatusToString(ms), stats)


def make_backend(name: str | LPBackend | None) -> LPBackend:
    if isinstance(name, LPBackend):
        return name
    if name in (None, "highs"):
        return HighsBackend()
    if name == "highs-ipm":
        return HighsBackend(solver="ipm")
    if name == "simplex":
        from .simplex import DenseSimplexBackend

        return DenseSimplexBackend()
    raise ValueError(f"unknown LP backend {name!r}")


WARM_FACTOR = 3.0
WARM_MIN_SECONDS = 30.0


class LPSession:
    """An LP over a growing grid, kept loaded in one backend.

    ``add_points`` appends rows for new angles, so backends that support it
    re-solve from the previous basis.  A warm re-solve that runs longer than
    ``WARM_FACTOR`` times the latest cold solve is abandoned and the model is
    rebuilt cold; on degenerate grids the warm dual simplex can stall.
    """

    def __init__(self, sys: ConstraintSystem, grid: Grid, backend=None, tol: LPTolerances | None = None):
        self.sys = sys
        self.tol = tol or LPTolerances()
        self.inst = build_lp(sys, grid)
        self.grid = grid
        self._A = [self.inst.A_ub]
        self._b = [self.inst.b_ub]
        self._fixed = self.inst.fixed_bound
        self.backend = make_backend(backend)
        self._loaded = False
        self._cold_seconds = 0.0
        self.cold_restarts = 0

    def add_points(self, thetas) -> np.ndarray:
        new = self.grid.new_points(thetas)
        if new.size == 0:
            return new
        A, b, _ = grid_rows(self.sys, new)
        self.grid = Grid(np.concatenate((self.grid.thetas, new)))
        self._A.append(A)
        self._b.append(b)
        self._fixed = min(self._fixed, fixed_bound(self.sys, new))
        if self._loaded:
            self.backend.add_rows(A, b)
        return new

    def _load(self):
        self.backend.load(self.inst)
        for Ai, bi in zip(self._A[1:], self._b[1:]):
            self.backend.add_rows(Ai, bi)
        self._loaded = True

    def solve(self, tol: LPTolerances | None = None) -> LPOutcome:
        tol = tol or self.tol
        sys = self.sys
        if sys.contradictory:
            return LPOutcome(
                LPStatus.INFEASIBLE,
                solver_stats={"reason": "contradictory equality rows", "equality_residual": float(np.max(np.abs(sys.eq_b)))},
            )
        A = sp.vstack(self._A).tocsr()
        b = np.concatenate(self._b)
        t0 = time.perf_counter()
        if sys.n_free == 0:
            beta = min(self.inst.beta_cap, float(np.min(b))) if b.size else self.inst.beta_cap
            z = np.array([beta])
            res = BackendResult(LPStatus.OPTIMAL, z, 0, "no free variables")
            backend_name = "none"
        else:
            warm = self._loaded
            if not warm:
                self._load()
            cap = max(WARM_MIN_SECONDS, WARM_FACTOR * self._cold_seconds) if warm else None
            capped = cap is not None and (tol.time_limit is None or cap < tol.time_limit)
            res = self.backend.solve(replace(tol, time_limit=cap) if capped else tol)
            t1 = t0
            if capped and res.info.get("time_limit"):
                log.info("warm re-solve passed %.0fs, rebuilding the LP cold", cap)
                self.cold_restarts += 1
                t1 = time.perf_counter()
                self._load()
                left = None if tol.time_limit is None else tol.time_limit - (t1 - t0)
                res = self.backend.solve(replace(tol, time_limit=left))
            if not warm or t1 != t0:
                self._cold_seconds = time.perf_counter() - t1
            backend_name = self.backend.name
        elapsed = time.perf_counter() - t0
        stats = {"backend": backend_name, "iterations": res.iterations, "seconds": elapsed, "rows": int(A.shape[0])}
        stats.update(res.info)
        if res.status is not LPStatus.OPTIMAL:
            stats["message"] = res.message
            return LPOutcome(res.status, solver_stats=stats)
        z = res.z
        x, beta = z[:-1], float(z[-1])
        viol = A @ z - b
        stats["primal_residual"] = float(max(0.0, np.max(viol))) if viol.size else 0.0
        if sys.eq_A.shape[0]:
            stats["equality_residual"] = sys.equality_residual(x)
        if stats["primal_residual"] > 1e3 * tol.primal:
            stats["message"] = "primal residual above tolerance"
            return LPOutcome(LPStatus.NUMERICAL_TROUBLE, solver_stats=stats)
        polys = sys.reconstruct(x)
        return LPOutcome(
            LPStatus.OPTIMAL,
            beta_star=min(beta, self._fixed),
            beta_lp=beta,
            polys=polys,
            x=x,
            solver_stats=stats,
        )


def solve(inst: LPInstance, backend=None, tol: LPTolerances | None = None) -> LPOutcome:
    """Solve a fixed instance once."""
    s = LPSession(inst.system, inst.grid, backend, tol)
    return s.solve()


def min_on_grid(polys, thetas, ts) -> float:
    return float(min(np.min(evaluate(polys[t], thetas)) for t in ts))


def write_lp(inst: LPInstance, path) -> None:
    """Dump the instance in CPLEX LP text format.

    Variables: ``b`` for beta, ``a_t_j`` for coefficient ``c_j`` of ``q_t``.
    """
    names = inst.var_names
    m = inst.n_vars

    def row_text(row, label, sense, rhs):
        row = row.tocoo()
        terms = []
        for j, v in sorted(zip(row.col, row.data)):
            if v == 0:
                continue
            sign = "-" if v < 0 else "+"
            terms.append(f"{sign} {abs(v)!r} {names[j]}")
        body = " ".join(terms) if terms else "0 b"
        return f" {label}: {body} {sense} {rhs!r}\n"

    with open(path, "w") as fh:
        fh.write(f"\\ ordered-search LP relaxation n={inst.system.n} k={inst.system.k} |G|={len(inst.grid)}\n")
        fh.write(f"\\ fixed_bound={inst.fixed_bound!r}\n")
        fh.write("Maximize\n obj: b\nSubject To\n")
        for i in range(inst.A_ub.shape[0]):
            g, t = inst.row_labels[i]
            fh.write(row_text(inst.A_ub[i], f"g{g}_q{t}", "<=", float(inst.b_ub[i])))
        for i in range(inst.A_eq.shape[0]):
            fh.write(row_text(inst.A_eq[i], f"eq{i}", "=", float(inst.b_eq[i])))
        fh.write("Bounds\n")
        for j in range(m):
            fh.write(f" {names[j]} free\n")
        fh.write(f" -inf <= b <= {inst.beta_cap!r}\n")
        fh.write("End\n")
