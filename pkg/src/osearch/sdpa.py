"""Export of the exact-search SDP in SDPA sparse format, a reader, and an
external conic solve used to cross-check LP verdicts at small ``n``.

The program (all blocks real symmetric, ``Q^(0) = J_n / n`` fixed):

    maximize   Q^(k)[0,0]
    subject to tr_j Q^(t) + (-1)^t tr_{j-n} Q^(t)
                   = tr_j Q^(t-1) + (-1)^t tr_{j-n} Q^(t-1)    0 < j < n, 1 <= t <= k
               tr Q^(t) = 1                                    1 <= t <= k
               Q^(k)[0,0] - s = 1 - epsilon,  s >= 0
               Q^(t) PSD

SDPA's dual form is ``max F0 . Y  s.t.  Fi . Y = c_i,  Y PSD``; the slack
``s`` lives in a trailing 1x1 diagonal block.  Restricting to real matrices
loses nothing: the data are real, so the real part of a feasible Hermitian
solution is feasible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

MAX_EXPORT_N = 2048


@dataclass
class SdpaProblem:
    """Sparse SDPA data; ``entries`` rows are ``(matno, block, i, j)`` 1-based with ``i <= j``."""

    block_struct: list
    c: np.ndarray
    index: np.ndarray  # (nnz, 4) ints
    values: np.ndarray
    comment: str = ""
    row_kinds: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return int(self.c.size)

    def matrix(self, matno: int, block: int) -> np.ndarray:
        """Dense symmetric block ``block`` of ``F_matno`` (both 1-based; ``matno`` 0 is F0)."""
        size = abs(self.block_struct[block - 1])
        M = np.zeros((size, size))
        sel = (self.index[:, 0] == matno) & (self.index[:, 1] == block)
        for (_, _, i, j), v in zip(self.index[sel], self.values[sel]):
            M[i - 1, j - 1] += v
            if i != j:
                M[j - 1, i - 1] += v
        return M

    def same_data(self, other: "SdpaProblem", tol: float = 0.0) -> bool:
        if list(self.block_struct) != list(other.block_struct) or self.m != other.m:
            return False
        if np.max(np.abs(self.c - other.c), initial=0.0) > tol:
            return False
        return _canonical(self) == _canonical(other) if tol == 0.0 else _close(self, other, tol)


def _canonical(p):
    acc = {}
    for key, v in zip(map(tuple, p.index.tolist()), p.values.tolist()):
        acc[key] = acc.get(key, 0.0) + v
    return {k: v for k, v in acc.items() if v != 0.0}


def _close(a, b, tol):
    A, B = _canonical(a), _canonical(b)
    keys = set(A) | set(B)
    return all(abs(A.get(k, 0.0) - B.get(k, 0.0)) <= tol for k in keys)


def build_clp_sdp(n: int, k: int, epsilon: float = 0.0) -> SdpaProblem:
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    if n > MAX_EXPORT_N:
        raise ValueError(f"refusing to materialize the SDP for n = {n} > {MAX_EXPORT_N}")
    idx, val, c, kinds = [], [], [], []

    def put(row, blk, i, j, v):
        if i > j:
            i, j = j, i
        idx.append((row, blk, i + 1, j + 1))
        val.append(v)

    row = 0
    for t in range(1, k + 1):
        s = (-1) ** t
        for j in range(1, n):
            row += 1
            terms = {}
            for i in range(n - j):
                terms[(i, i + j)] = terms.get((i, i + j), 0.0) + 0.5
            for i in range(j):
                terms[(i, i + n - j)] = terms.get((i, i + n - j), 0.0) + 0.5 * s
            for (a, b), v in sorted(terms.items()):
                if v != 0.0:
                    put(row, t, a, b, v)
                    if t >= 2:
                        put(row, t - 1, a, b, -v)
            c.append((n - j) / n + s * j / n if t == 1 else 0.0)
            kinds.append(("forward", t, j))
    for t in range(1, k + 1):
        row += 1
        for i in range(n):
            put(row, t, i, i, 1.0)
        c.append(1.0)
        kinds.append(("trace", t, 0))
    row += 1
    put(row, k, 0, 0, 1.0)
    put(row, k + 1, 0, 0, -1.0)
    c.append(1.0 - epsilon)
    kinds.append(("final", k, 0))
    # objective: Q^(k)[0,0]
    put(0, k, 0, 0, 1.0)

    return SdpaProblem(
        block_struct=[n] * k + [-1],
        c=np.asarray(c, dtype=float),
        index=np.asarray(idx, dtype=np.int64).reshape(-1, 4),
        values=np.asarray(val, dtype=float),
        comment=f"ordered search exact-algorithm SDP n={n} k={k} epsilon={epsilon!r}",
        row_kinds=kinds,
    )


def write_sdpa(prob: SdpaProblem, path) -> None:
    lines = []
    if prob.comment:
        lines.append(f'"{prob.comment}"')
    lines.append(f"{prob.m} = mDIM")
    lines.append(f"{len(prob.block_struct)} = nBLOCK")
    lines.append(" ".join(str(b) for b in prob.block_struct) + " = bLOCKsTRUCT")
    lines.append(" ".join(repr(float(x)) for x in prob.c))
    order = np.lexsort((prob.index[:, 3], prob.index[:, 2], prob.index[:, 1], prob.index[:, 0]))
    for r in order:
        mat, blk, i, j = prob.index[r]
        lines.append(f"{mat} {blk} {i} {j} {float(prob.values[r])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


_PUNCT = re.compile(r"[{},()]")


def read_sdpa(path) -> SdpaProblem:
    """Parse SDPA sparse format (``.dat-s``)."""
    raw = Path(path).read_text().splitlines()
    comment = ""
    body = []
    for line in raw:
        s = line.strip()
        if not s:
            continue
        if s[0] in "\"*":
            if not body and not comment:
                comment = s.strip('"* ')
            continue
        body.append(s)
    if len(body) < 4:
        raise ValueError("truncated SDPA file")

    def nums(s):
        s = _PUNCT.sub(" ", s.split("=")[0])
        return s.split()

    m = int(nums(body[0])[0])
    nb = int(nums(body[1])[0])
    bs = [int(x) for x in nums(body[2])[:nb]]
    # c may wrap over several lines
    c, pos = [], 3
    while len(c) < m:
        c += [float(x) for x in nums(body[pos])]
        pos += 1
    if len(c) != m:
        raise ValueError(f"expected {m} entries in c, got {len(c)}")
    idx, val = [], []
    for s in body[pos:]:
        f = nums(s)
        if len(f) != 5:
            raise ValueError(f"bad entry line: {s!r}")
        mat, blk, i, j = (int(x) for x in f[:4])
        if not (0 <= mat <= m and 1 <= blk <= nb):
            raise ValueError(f"entry out of range: {s!r}")
        size = abs(bs[blk - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise ValueError(f"entry index out of block: {s!r}")
        if i > j:
            i, j = j, i
        idx.append((mat, blk, i, j))
        val.append(float(f[4]))
    return SdpaProblem(bs, np.asarray(c), np.asarray(idx, dtype=np.int64).reshape(-1, 4), np.asarray(val), comment)


def export_sdp(n: int, k: int, epsilon: float, path) -> SdpaProblem:
    prob = build_clp_sdp(n, k, epsilon)
    write_sdpa(prob, path)
    return prob


# ---------------------------------------------------------------- external solve


@dataclass
class ConicCheck:
    status: str
    objective: float | None
    feasible: bool | None
    solver: str


def solve_sdpa(prob: SdpaProblem, epsilon: float = 0.0, tol: float = 1e-7, solver: str = "CLARABEL") -> ConicCheck:
    """Decide feasibility with an external conic solver.

    Rows touching diagonal (slack) blocks are dropped and ``F0 . Y`` is
    maximized instead; the instance is feasible iff the optimum reaches
    ``1 - epsilon - tol``.  This avoids relying on a solver's infeasibility
    detection for nearly feasible instances.
    """
    import cvxpy as cp

    dense = [b for b, size in enumerate(prob.block_struct, 1) if size > 0]
    diag = {b for b, size in enumerate(prob.block_struct, 1) if size < 0}
    offsets, total = {}, 0
    for b in dense:
        offsets[b] = total
        total += prob.block_struct[b - 1] ** 2
    drop = {int(r) for r, b in zip(prob.index[:, 0], prob.index[:, 1]) if b in diag and r > 0}
    keep_rows = [r for r in range(1, prob.m + 1) if r not in drop]
    rmap = {r: i for i, r in enumerate(keep_rows)}
    rows, cols, vals = [], [], []
    obj = np.zeros(total)
    for (mat, blk, i, j), v in zip(prob.index.tolist(), prob.values.tolist()):
        if blk in diag:
            continue
        size = prob.block_struct[blk - 1]
        # cvxpy vec() is column-major
        pos = [offsets[blk] + (j - 1) * size + (i - 1)]
        if i != j:
            pos.append(offsets[blk] + (i - 1) * size + (j - 1))
        for p_ in pos:
            if mat == 0:
                obj[p_] += v
            elif mat in rmap:
                rows.append(rmap[mat])
                cols.append(p_)
                vals.append(v)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(keep_rows), total))
    b = prob.c[np.asarray(keep_rows, dtype=int) - 1]
    Ys = [cp.Variable((prob.block_struct[bk - 1],) * 2, symmetric=True) for bk in dense]
    y = cp.hstack([cp.vec(Y, order="F") for Y in Ys])
    cons = [A @ y == b] + [Y >> 0 for Y in Ys]
    problem = cp.Problem(cp.Maximize(obj @ y), cons)
    try:
        problem.solve(solver=solver)
    except cp.error.SolverError as exc:
        return ConicCheck(f"solver error: {exc}", None, None, solver)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        return ConicCheck(problem.status, None, None, solver)
    val = float(problem.value)
    return ConicCheck(problem.status, val, bool(val >= 1.0 - epsilon - tol), solver)
