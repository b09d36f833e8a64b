"""Symmetric real-valued Laurent polynomials and their Gram/Chebyshev views.

A polynomial of degree < n is stored by its half-coefficient sequence
``c = (c_0, ..., c_{n-1})`` where ``c_j`` multiplies both ``z^j`` and
``z^{-j}``.  On the unit circle

    q(e^{i theta}) = c_0 + 2 * sum_{j>=1} c_j cos(j theta).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Points per chunk when materializing cos(j theta) tables.
_CHUNK_ENTRIES = 1 << 22


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SymLaurentPoly:
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size

    @classmethod
    def constant(cls, n: int, value: float = 1.0) -> "SymLaurentPoly":
        c = np.zeros(n)
        c[0] = value
        return cls(c)

    def __call__(self, theta):
        return evaluate(self, theta)

    def __eq__(self, other):
        if not isinstance(other, SymLaurentPoly):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"SymLaurentPoly(n={self.n}, coeffs={np.array2string(self.coeffs, threshold=8)})"


@dataclass(frozen=True, eq=False)
class ChebForm:
    """``Q(x) = sum_j b_j T_j(x)`` on [-1, 1], with ``x = cos(theta)``."""

    cheb_coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cheb_coeffs", _frozen(self.cheb_coeffs))

    @property
    def degree(self) -> int:
        return self.cheb_coeffs.size - 1

    def __call__(self, x):
        return np.polynomial.chebyshev.chebval(x, self.cheb_coeffs)


def fejer_kernel(n: int) -> SymLaurentPoly:
    """Fejer kernel ``F_n`` with ``c_j = 1 - j/n``."""
    if n < 1:
        raise ValueError(f"fejer_kernel needs n >= 1, got {n}")
    return SymLaurentPoly(1.0 - np.arange(n) / n)


def evaluate(q: SymLaurentPoly, theta):
    """Value of ``q`` at ``e^{i theta}``; scalar in, scalar out."""
    th = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(th)):
        raise ValueError("theta must be finite")
    flat = th.ravel()
    c = q.coeffs
    j = np.arange(1, q.n)
    out = np.empty(flat.size)
    step = max(1, _CHUNK_ENTRIES // max(1, q.n))
    for s in range(0, flat.size, step):
        blk = flat[s : s + step]
        out[s : s + step] = c[0] + 2.0 * (np.cos(np.outer(blk, j)) @ c[1:])
    if th.ndim == 0:
        return float(out[0])
    return out.reshape(th.shape)


def evaluate_precise(q: SymLaurentPoly, theta) -> np.ndarray:
    """Evaluate with Neumaier-compensated summation over the cosine terms.

    Slower than :func:`evaluate` but keeps the rounding error at the level of
    a single term, which matters at degrees in the thousands.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    c = q.coeffs
    s = np.full(th.shape, c[0])
    comp = np.zeros(th.shape)
    for j in range(1, q.n):
        if c[j] == 0.0:
            continue
        term = 2.0 * c[j] * np.cos(j * th)
        t = s + term
        big = np.abs(s) >= np.abs(term)
        comp += np.where(big, (s - t) + term, (term - t) + s)
        s = t
    return s + comp


def evaluate_uniform(q: SymLaurentPoly, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Values at ``theta_i = pi * i / m`` for ``i = 0..m`` via one FFT."""
    if m < 1:
        raise ValueError("m must be positive")
    size = 2 * m
    while size < 2 * q.n - 1:
        size *= 2
    v = np.zeros(size)
    v[0] = q.coeffs[0]
    v[1 : q.n] = q.coeffs[1:]
    if q.n > 1:
        v[-(q.n - 1) :] = q.coeffs[1:][::-1]
    vals = np.fft.fft(v).real
    stride = size // (2 * m)
    thetas = np.linspace(0.0, np.pi, m + 1)
    return thetas, vals[: stride * m + 1 : stride]


def evaluate_at_z(q: SymLaurentPoly, z) -> np.ndarray:
    """Evaluate the Laurent polynomial at arbitrary nonzero complex ``z``."""
    z = np.asarray(z, dtype=complex)
    c = q.coeffs
    out = np.full(z.shape, c[0], dtype=complex)
    zp = np.ones(z.shape, dtype=complex)
    zi = np.ones(z.shape, dtype=complex)
    inv = 1.0 / z
    for j in range(1, q.n):
        zp = zp * z
        zi = zi * inv
        out += c[j] * (zp + zi)
    return out


def to_cheb(q: SymLaurentPoly) -> ChebForm:
    b = q.coeffs * 2.0
    b[0] = q.coeffs[0]
    return ChebForm(b)


def from_cheb(f: ChebForm) -> SymLaurentPoly:
    c = f.cheb_coeffs / 2.0
    c[0] = f.cheb_coeffs[0]
    return SymLaurentPoly(c)


def generalized_trace(M, j: int):
    """Sum along the ``j``-th superdiagonal (``j < 0``: subdiagonal); 0 if ``|j| >= m``."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    m = M.shape[0]
    if abs(j) >= m:
        return M.dtype.type(0)
    return np.trace(M, offset=j)


def cyclic_trace(M, j: int):
    """``Tr_j``: the ``j``-th diagonal plus its wrap-around partner."""
    m = np.asarray(M).shape[0]
    if not -m < j < m:
        raise ValueError(f"cyclic trace index must satisfy |j| < {m}")
    partner = j - m if j >= 0 else j + m
    return generalized_trace(M, j) + generalized_trace(M, partner)


def all_generalized_traces(M) -> np.ndarray:
    """``tr_j(M)`` for ``j = 0..m-1`` (nonnegative offsets only)."""
    M = np.asarray(M)
    m = M.shape[0]
    return np.array([np.trace(M, offset=j) for j in range(m)])


def gram_to_poly(Q, tol: float = 1e-10) -> SymLaurentPoly:
    """Read off ``c_j = tr_j(Q)`` from a Hermitian Gram matrix."""
    Q = np.asarray(Q)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Gram matrix must be square")
    scale = max(1.0, float(np.max(np.abs(Q))) if Q.size else 1.0)
    if np.max(np.abs(Q - Q.conj().T)) > tol * scale:
        raise ValueError("Gram matrix is not Hermitian")
    traces = all_generalized_traces(Q)
    imag = np.abs(np.imag(traces))
    if np.any(imag > tol * scale):
        j = int(np.argmax(imag))
        raise ValueError(f"tr_{j}(Q) has imaginary part {imag[j]:.3e}; polynomial is not symmetric")
    return SymLaurentPoly(np.real(traces))


def write_csv(q: SymLaurentPoly, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "c"])
        for j, c in enumerate(q.coeffs):
            w.writerow([j, repr(float(c))])


def read_csv(path) -> SymLaurentPoly:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["j", "c"]:
        raise ValueError("polynomial CSV must start with header 'j,c'")
    body = [r for r in rows[1:] if r]
    idx = [int(r[0]) for r in body]
    if idx != list(range(len(body))):
        raise ValueError("coefficient indices must be 0..n-1 in order")
    return SymLaurentPoly([float(r[1]) for r in body])
