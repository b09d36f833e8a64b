"""Linear equalities tying q_0 ... q_k together, and the variable elimination.

The forward step between consecutive polynomials, ``q_t = q_{t-1}`` at every
``z`` with ``z^n = (-1)^t``, is the coefficient identity

    (I + (-1)^t V) (c_t - c_{t-1}) = 0,

where ``V`` fixes index 0 and reverses indices 1..n-1.  Given both neighbours,
each interior polynomial is pinned down, so only every other polynomial needs
to be a decision variable.

Every polynomial in a system is affine in the free variables ``x``:
``c_t = A_t x + b_t`` with sparse ``A_t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .poly import SymLaurentPoly, fejer_kernel


def v_index(n: int) -> np.ndarray:
    """Index array with ``(V a)[j] = a[v_index(n)[j]]``."""
    return np.concatenate(([0], n - np.arange(1, n))).astype(np.intp)


def apply_v(n: int, a) -> np.ndarray:
    a = np.asarray(a)
    if a.shape[0] != n:
        raise ValueError(f"expected {n} coefficients, got {a.shape[0]}")
    return a[v_index(n)]


def forward_residual(a_t, a_prev, t: int) -> np.ndarray:
    """``(I + (-1)^t V)(a_t - a_prev)``.

    With equal constant terms this vanishes exactly when the two polynomials
    agree at every root of ``z^n = (-1)^t``.  For odd ``t`` the constant-term
    difference sits in the kernel, which the normalization row covers.
    """
    a_t = np.asarray(a_t, dtype=float)
    a_prev = np.asarray(a_prev, dtype=float)
    if a_t.shape != a_prev.shape:
        raise ValueError("coefficient sequences differ in length")
    if t < 1:
        raise ValueError("step index must be >= 1")
    d = a_t - a_prev
    return d + (-1) ** t * apply_v(d.size, d)


def eliminate_middle(a_before, a_after, t: int) -> np.ndarray:
    """Interior polynomial at step ``t`` determined by its two neighbours."""
    a_before = np.asarray(a_before, dtype=float)
    a_after = np.asarray(a_after, dtype=float)
    if a_before.shape != a_after.shape:
        raise ValueError("coefficient sequences differ in length")
    s = (-1) ** t
    return 0.5 * (a_before + a_after) + 0.5 * s * apply_v(a_before.size, a_before - a_after)


def _eliminate_map(A_prev, b_prev, A_next, b_next, t, idx):
    s = (-1) ** t
    dA = (A_prev - A_next).tocsr()[idx]
    A = 0.5 * (A_prev + A_next) + 0.5 * s * dA
    b = 0.5 * (b_prev + b_next) + 0.5 * s * (b_prev - b_next)[idx]
    return A.tocsr(), b


@dataclass(frozen=True)
class FreeBlock:
    """A contiguous run of free variables.

    ``kind`` is ``"poly"`` (coefficients ``c_1..c_{n-1}`` of ``q_t``) or
    ``"slack"`` (the V-invariant part of ``q_1``, one variable per index pair
    ``{j, n-j}``, stored as ``c_j`` of ``q_1`` for ``j <= n/2``).
    """

    t: int
    kind: str
    offset: int
    size: int
    coeff_index: tuple


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    n: int
    k: int
    eliminated: bool
    boundary_lo: SymLaurentPoly
    boundary_hi: SymLaurentPoly
    blocks: tuple
    maps: tuple  # (A_t, b_t) for t = 0..k
    eq_A: sp.csr_matrix
    eq_b: np.ndarray
    tol: float = 1e-12
    var_names: tuple = field(default=())

    @property
    def n_free(self) -> int:
        return int(self.maps[0][0].shape[1])

    @property
    def contradictory(self) -> bool:
        """True when a row with no free variables has a nonzero right side."""
        if self.eq_A.shape[0] == 0:
            return False
        empty = np.diff(self.eq_A.indptr) == 0
        return bool(np.any(empty & (np.abs(self.eq_b) > self.tol)))

    @property
    def intermediate(self) -> range:
        return range(1, self.k)

    def coefficients(self, x=None) -> list[np.ndarray]:
        x = np.zeros(self.n_free) if x is None else np.asarray(x, dtype=float)
        if x.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} free values, got shape {x.shape}")
        return [A @ x + b for A, b in self.maps]

    def reconstruct(self, x=None) -> tuple[SymLaurentPoly, ...]:
        cs = self.coefficients(x)
        # endpoints are constants, never touched by floating arithmetic
        cs[0] = self.boundary_lo.coeffs
        cs[-1] = self.boundary_hi.coeffs
        return tuple(SymLaurentPoly(c) for c in cs)

    def equality_residual(self, x=None) -> float:
        if self.eq_A.shape[0] == 0:
            return 0.0
        x = np.zeros(self.n_free) if x is None else np.asarray(x, dtype=float)
        return float(np.max(np.abs(self.eq_A @ x - self.eq_b)))

    def summary(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "eliminated": self.eliminated,
            "n_free": self.n_free,
            "blocks": [
                {"t": b.t, "kind": b.kind, "offset": b.offset, "size": b.size} for b in self.blocks
            ],
            "equality_rows": int(self.eq_A.shape[0]),
            "contradictory": self.contradictory,
        }


def _fixed(n, m, c):
    return sp.csr_matrix((n, m)), np.asarray(c, dtype=float).copy()


def _poly_block(n, m, offset, t):
    rows = np.arange(1, n)
    cols = offset + np.arange(n - 1)
    A = sp.csr_matrix((np.ones(n - 1), (rows, cols)), shape=(n, m))
    b = np.zeros(n)
    b[0] = 1.0
    names = tuple(f"a_{t}_{j}" for j in range(1, n))
    return A, b, names


def build_system(n: int, k: int, eliminate: bool = True, tol: float = 1e-12) -> ConstraintSystem:
    """Constraint system for searching ``n`` items with ``k`` queries.

    With ``eliminate=True`` (default) the free variables are, for even ``k``,
    ``q_2, q_4, ..., q_{k-2}``; for odd ``k``, the V-invariant slack of ``q_1``
    plus ``q_3, q_5, ..., q_{k-2}``.  Every other interior polynomial is
    reconstructed from its neighbours, so all forward steps hold identically
    and ``eq_A`` only carries rows that involve no variables at all (the
    ``k = 1`` case).

    With ``eliminate=False`` every interior polynomial is free and the forward
    steps become explicit equality rows.
    """
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    F = fejer_kernel(n)
    one = SymLaurentPoly.constant(n)
    idx = v_index(n)
    if not eliminate:
        return _build_full(n, k, F, one, idx, tol)

    if k % 2 == 0:
        free_ts = list(range(2, k - 1, 2))
        slack = 0
    else:
        free_ts = list(range(3, k - 1, 2))
        slack = (n - 1 + 1) // 2 if k >= 3 else 0
    m = slack + (n - 1) * len(free_ts)

    maps: list = [None] * (k + 1)
    blocks = []
    names: list[str] = []
    maps[0] = _fixed(n, m, F.coeffs)
    maps[k] = _fixed(n, m, one.coeffs)

    if k % 2 == 1 and k >= 3:
        # c1_j = x_r and c1_{n-j} = x_r + F_{n-j} - F_j for the pair representative r = j
        rows, cols = [], []
        b = F.coeffs.copy()
        reps = []
        for j in range(1, n):
            r = min(j, n - j)
            rows.append(j)
            cols.append(r - 1)
            b[j] = F.coeffs[j] - F.coeffs[r]
            if r == j:
                reps.append(j)
        A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, m))
        maps[1] = (A, b)
        if slack:
            blocks.append(FreeBlock(1, "slack", 0, slack, tuple(reps)))
        names += [f"a_1_{j}" for j in reps]

    offset = slack
    for t in free_ts:
        A, b, nm = _poly_block(n, m, offset, t)
        maps[t] = (A, b)
        blocks.append(FreeBlock(t, "poly", offset, n - 1, tuple(range(1, n))))
        names += list(nm)
        offset += n - 1

    derived = range(1, k, 2) if k % 2 == 0 else range(2, k, 2)
    for t in derived:
        A_prev, b_prev = maps[t - 1]
        A_next, b_next = maps[t + 1]
        maps[t] = _eliminate_map(A_prev, b_prev, A_next, b_next, t, idx)

    if k == 1:
        res = forward_residual(one.coeffs, F.coeffs, 1)
        eq_b = np.concatenate(([one.coeffs[0] - F.coeffs[0]], res[1:]))
        eq_A = sp.csr_matrix((eq_b.size, m))
    else:
        eq_b = np.zeros(0)
        eq_A = sp.csr_matrix((0, m))

    return ConstraintSystem(
        n=n,
        k=k,
        eliminated=True,
        boundary_lo=F,
        boundary_hi=one,
        blocks=tuple(blocks),
        maps=tuple(maps),
        eq_A=eq_A,
        eq_b=eq_b,
        tol=tol,
        var_names=tuple(names),
    )


def _build_full(n, k, F, one, idx, tol):
    m = (n - 1) * (k - 1)
    maps: list = [None] * (k + 1)
    maps[0] = _fixed(n, m, F.coeffs)
    maps[k] = _fixed(n, m, one.coeffs)
    blocks, names = [], []
    for t in range(1, k):
        off = (t - 1) * (n - 1)
        A, b, nm = _poly_block(n, m, off, t)
        maps[t] = (A, b)
        blocks.append(FreeBlock(t, "poly", off, n - 1, tuple(range(1, n))))
        names += list(nm)

    rows_A, rows_b = [], []
    for t in range(1, k + 1):
        s = (-1) ** t
        A_t, b_t = maps[t]
        A_p, b_p = maps[t - 1]
        dA = (A_t - A_p).tocsr()
        db = b_t - b_p
        R = dA + s * dA[idx]
        r = db + s * db[idx]
        # rows j and n-j coincide up to sign; row 0 is the constant-term row
        keep = [j for j in range(1, n) if j <= n - j and not (j == n - j and s < 0)]
        rows_A.append(R[keep])
        rows_b.append(-r[keep])
        rows_A.append(sp.csr_matrix(dA[[0]]))
        rows_b.append(-db[[0]])
    eq_A = sp.vstack(rows_A).tocsr()
    eq_A.eliminate_zeros()
    eq_b = np.concatenate(rows_b)
    live = (np.diff(eq_A.indptr) > 0) | (np.abs(eq_b) > tol)
    eq_A, eq_b = eq_A[live], eq_b[live]
    return ConstraintSystem(
        n=n,
        k=k,
        eliminated=False,
        boundary_lo=F,
        boundary_hi=one,
        blocks=tuple(blocks),
        maps=tuple(maps),
        eq_A=eq_A,
        eq_b=eq_b,
        tol=tol,
        var_names=tuple(names),
    )
