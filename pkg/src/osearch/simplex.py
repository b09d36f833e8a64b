"""Dense revised simplex, used as an independent LP backend for small instances.

The primal ``max beta`` over free variables is solved through its dual in
standard form

    minimize g^T u   subject to   M u = c,  u >= 0,

with ``M = [A_ub^T, A_eq^T, -A_eq^T, e_beta]`` and ``g = [b_ub, b_eq, -b_eq, cap]``.
The simplex multipliers of the optimal basis are the primal solution.
Bland's rule makes cycling impossible; the basis inverse is kept explicitly
and refactored periodically.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lp import BackendResult, LPBackend, LPInstance, LPStatus, LPTolerances

_REFACTOR_EVERY = 64
_PIVOT_TOL = 1e-11


class SimplexFailure(RuntimeError):
    pass


def _pivot(Binv, xB, d, pos):
    piv = d[pos]
    Binv[pos] /= piv
    xB[pos] /= piv
    for i in np.nonzero(d)[0]:
        if i != pos:
            Binv[i] -= d[i] * Binv[pos]
            xB[i] -= d[i] * xB[pos]


def _iterate(A, rhs, cost, basis, Binv, xB, allowed, tol, max_iter):
    its = 0
    r = A.shape[0]
    inbasis = np.zeros(A.shape[1], dtype=bool)
    inbasis[basis] = True
    while True:
        if its and its % _REFACTOR_EVERY == 0:
            Binv[:] = np.linalg.inv(A[:, basis])
            xB[:] = Binv @ rhs
        pi = cost[basis] @ Binv
        red = cost - pi @ A
        cand = np.nonzero(allowed & ~inbasis & (red < -tol))[0]
        if cand.size == 0:
            return "optimal", its
        j = int(cand[0])
        d = Binv @ A[:, j]
        rows = np.nonzero(d > _PIVOT_TOL)[0]
        if rows.size == 0:
            return "unbounded", its
        ratios = np.maximum(xB[rows], 0.0) / d[rows]
        best = np.min(ratios)
        ties = rows[ratios <= best + 1e-14 * max(1.0, abs(best))]
        pos = int(ties[np.argmin(np.asarray(basis)[ties])])
        inbasis[basis[pos]] = False
        basis[pos] = j
        inbasis[j] = True
        _pivot(Binv, xB, d, pos)
        its += 1
        if its > max_iter:
            return "iteration_limit", its
        if r == 0:
            return "optimal", its


def standard_form_multipliers(M, rhs, cost, tol=1e-9, max_iter=200_000):
    """Solve ``min cost^T u, M u = rhs, u >= 0`` and return ``(status, pi, iterations)``.

    ``pi`` are the simplex multipliers (dual values of the equality rows).
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    cost = np.asarray(cost, dtype=float)
    r, N = M.shape
    sign = np.where(rhs < 0, -1.0, 1.0)
    Ms = M * sign[:, None]
    bs = rhs * sign
    A = np.hstack((Ms, np.eye(r)))
    basis = list(range(N, N + r))
    Binv = np.eye(r)
    xB = bs.copy()

    c1 = np.concatenate((np.zeros(N), np.ones(r)))
    everything = np.ones(N + r, dtype=bool)
    st, its1 = _iterate(A, bs, c1, basis, Binv, xB, everything, tol, max_iter)
    if st != "optimal":
        return "numerical", None, its1
    scale = max(1.0, float(np.max(np.abs(bs))) if r else 1.0)
    if float(c1[basis] @ xB) > 1e3 * tol * scale:
        return "infeasible", None, its1

    # drive zero-level artificials out where a structural column can replace them
    inbasis = set(basis)
    for pos in range(r):
        if basis[pos] < N:
            continue
        row = Binv[pos] @ Ms
        for j in np.nonzero(np.abs(row) > 1e-9)[0]:
            if j not in inbasis:
                d = Binv @ A[:, j]
                inbasis.discard(basis[pos])
                basis[pos] = int(j)
                inbasis.add(int(j))
                _pivot(Binv, xB, d, pos)
                break
        # otherwise the row is redundant; the artificial stays basic at zero

    c2 = np.concatenate((cost, np.zeros(r)))
    structural = np.concatenate((np.ones(N, dtype=bool), np.zeros(r, dtype=bool)))
    st, its2 = _iterate(A, bs, c2, basis, Binv, xB, structural, tol, max_iter)
    if st == "unbounded":
        return "unbounded", None, its1 + its2
    if st != "optimal":
        return "numerical", None, its1 + its2
    pi = (c2[basis] @ Binv) * sign
    return "optimal", pi, its1 + its2


class DenseSimplexBackend(LPBackend):
    """Backend over :func:`standard_form_multipliers`; meant for ``n`` up to a few dozen."""

    name = "simplex"

    def __init__(self, max_iter: int = 200_000):
        self.max_iter = max_iter

    def load(self, inst: LPInstance) -> None:
        self._m = inst.n_vars + 1
        self._cap = inst.beta_cap
        self._A = [sp.csr_matrix(inst.A_ub)]
        self._b = [np.asarray(inst.b_ub, dtype=float)]
        self._Aeq = sp.csr_matrix(inst.A_eq)
        self._beq = np.asarray(inst.b_eq, dtype=float)

    def add_rows(self, A, b) -> None:
        self._A.append(sp.csr_matrix(A))
        self._b.append(np.asarray(b, dtype=float))

    def solve(self, tol: LPTolerances) -> BackendResult:
        A_ub = sp.vstack(self._A).toarray()
        b_ub = np.concatenate(self._b)
        A_eq = self._Aeq.toarray()
        cap_row = np.zeros((1, self._m))
        cap_row[0, -1] = 1.0
        M = np.hstack((A_ub.T, A_eq.T, -A_eq.T, cap_row.T))
        g = np.concatenate((b_ub, self._beq, -self._beq, [self._cap]))
        c = np.zeros(self._m)
        c[-1] = 1.0
        st, pi, its = standard_form_multipliers(M, c, g, tol=tol.gap, max_iter=self.max_iter)
        if st == "optimal":
            return BackendResult(LPStatus.OPTIMAL, pi, its)
        if st == "unbounded":
            # dual unbounded below means the primal is infeasible
            return BackendResult(LPStatus.INFEASIBLE, None, its, "dual unbounded")
        if st == "infeasible":
            return BackendResult(LPStatus.NUMERICAL_TROUBLE, None, its, "dual infeasible: primal unbounded")
        return BackendResult(LPStatus.NUMERICAL_TROUBLE, None, its, st)
