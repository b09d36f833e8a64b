"""Spectral factors of nonnegative trigonometric polynomials and the rank-one
Gram matrices they induce.

A nonnegative symmetric Laurent polynomial ``q`` of degree < n equals
``|p(z)|^2`` on the unit circle for an ordinary polynomial ``p`` of degree
< n whose roots lie in the closed unit disk.  Here ``p`` is recovered from
the roots of ``Q(x) = q(z)``, ``x = (z + 1/z)/2``, in the Chebyshev basis:
each ``x``-root gives a pair ``(r, 1/r)`` of ``z``-roots and ``p`` keeps the
member inside the disk.  A Newton polish on the coefficients follows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
from numpy.polynomial import chebyshev as C

from .poly import SymLaurentPoly, fejer_kernel, to_cheb

log = logging.getLogger(__name__)

POLISH_MAX_N = 2048
TAU_CIRCLE = 1e-7
TAU_ROOT = 1e-7
EPS_EQ = 1e-8
TOL_PSD = 1e-9
END_SNAP = 1e-6


class FactorizationError(ValueError):
    pass


class PreconditionError(ValueError):
    """Input violates the hypotheses of a check (as opposed to failing it)."""


@dataclass(frozen=True, eq=False)
class SpectralFactor:
    coeffs: np.ndarray
    method: str = "roots"
    residual: float = 0.0

    def __post_init__(self):
        b = np.array(self.coeffs, dtype=complex, copy=True)
        if b.ndim != 1 or b.size == 0:
            raise ValueError("factor needs a non-empty coefficient vector")
        b.setflags(write=False)
        object.__setattr__(self, "coeffs", b)

    @property
    def n(self) -> int:
        return self.coeffs.size

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), self.coeffs)

    def squared(self) -> SymLaurentPoly:
        """``|p|^2`` as a symmetric Laurent polynomial."""
        return SymLaurentPoly(autocorrelation(self.coeffs).real)

    def roots(self) -> np.ndarray:
        b = np.trim_zeros(self.coeffs, "b")
        return np.roots(b[::-1]) if b.size > 1 else np.zeros(0, dtype=complex)

    def reflected(self) -> "SpectralFactor":
        """``z^{n-1} conj(p(1/conj z))``: same ``|p|^2``, roots mirrored through the circle.

        Of all spectral factors this one has the largest ``|b_0|``.
        """
        return SpectralFactor(np.conj(self.coeffs[::-1]), self.method, self.residual)

    def to_pairs(self) -> list:
        return [[float(c.real), float(c.imag)] for c in self.coeffs]

    @classmethod
    def from_pairs(cls, pairs, method="stored") -> "SpectralFactor":
        a = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(a[:, 0] + 1j * a[:, 1], method)


def autocorrelation(b) -> np.ndarray:
    """``c_j = sum_i conj(b_i) b_{i+j}`` for ``j = 0..len(b)-1`` (via FFT)."""
    b = np.asarray(b, dtype=complex)
    n = b.size
    size = 1 << int(np.ceil(np.log2(max(2, 2 * n))))
    B = np.fft.fft(b, size)
    return np.fft.ifft(np.abs(B) ** 2)[:n]


def _fix_phase(b):
    nz = np.nonzero(np.abs(b) > 1e-14 * max(1e-300, np.max(np.abs(b))))[0]
    if nz.size == 0:
        return b
    # b_0 is the anchor unless it is (numerically) zero
    lead = b[0] if abs(b[0]) > 1e-12 * np.linalg.norm(b) else b[nz[0]]
    return b * (np.conj(lead) / abs(lead))


def _from_roots(roots, n, c0):
    roots = np.asarray(roots, dtype=complex)
    N = 1 << int(np.ceil(np.log2(max(2, 2 * n))))
    w = np.exp(2j * np.pi * np.arange(N) / N)
    if roots.size:
        # roots on the circle may hit a sample point exactly: log 0 -> exp 0 is right
        with np.errstate(divide="ignore"):
            logs = np.sum(np.log(w[:, None] - roots[None, :]), axis=1)
    else:
        logs = np.zeros(N, dtype=complex)
    logs -= np.max(logs.real)
    b = np.fft.fft(np.exp(logs)) / N
    b = b[:n]
    norm = np.sqrt(np.sum(np.abs(b) ** 2))
    return b * (np.sqrt(c0) / norm)


def _x_roots(q: SymLaurentPoly):
    b = to_cheb(q).cheb_coeffs
    nz = np.nonzero(b)[0]
    L = nz[-1] + 1 if nz.size else 1
    if L == 1:
        return np.zeros(0, dtype=complex)
    return C.chebroots(b[:L]).astype(complex)


def _disk_roots(xr, end_tol: float = 1e-10, imag_tol: float = TAU_CIRCLE):
    """Map roots of ``Q`` in ``x`` to roots of the spectral factor in ``z``.

    Every ``x``-root contributes the member of ``z + 1/z = 2x`` inside the
    disk.  Real roots in (-1, 1) sit on the circle, where both members tie;
    they must come in pairs (a double zero of ``q``), and each pair
    contributes one conjugate pair ``exp(+-i phi)``.  Roots within
    ``imag_tol`` of the real axis count as real.
    """
    # a double root comes back split by ~sqrt(eps), possibly off the real axis
    real = np.abs(xr.imag) <= imag_tol
    inner = real & (np.abs(xr.real) < 1 - end_tol)
    ends = real & ~inner & (np.abs(xr.real) <= 1 + end_tol)
    rest = ~(inner | ends)

    if np.count_nonzero(inner) % 2:
        # an endpoint root is simple in x and may land just inside [-1, 1]
        cand = np.where(inner, 1 - np.abs(xr.real), np.inf)
        i = int(np.argmin(cand))
        if cand[i] <= END_SNAP:
            inner[i], ends[i] = False, True

    x = xr[rest]
    s = np.sqrt(x * x - 1)
    s = np.where((x.conj() * s).real < 0, -s, s)
    # x + s is the outer root; take the inner one as its reciprocal (no cancellation)
    zs = [1.0 / (x + s)]
    zs.append(np.sign(xr[ends].real).astype(complex))

    xi = np.sort(xr[inner].real)
    if xi.size % 2:
        # find the unpaired one: the root farthest from both neighbours
        gaps = np.abs(np.diff(xi))
        lone = xi[int(np.argmax(np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])))]
        raise FactorizationError(
            f"root z = {np.exp(1j * np.arccos(lone)):.10g} on the unit circle has no partner; "
            "the polynomial changes sign there"
        )
    if xi.size:
        phi = np.arccos(np.clip(xi.reshape(-1, 2).mean(axis=1), -1.0, 1.0))
        zs += [np.exp(1j * phi), np.exp(-1j * phi)]
    return np.concatenate(zs)


def _factor_roots(q: SymLaurentPoly):
    xr = _x_roots(q)
    roots = _disk_roots(xr)
    bad = np.abs(roots) > 1 + TAU_ROOT
    if np.any(bad):
        raise FactorizationError(f"root {roots[bad][0]:.10g} lies outside the unit disk")
    # a short q gets a short factor: missing degree is a root at infinity, not at 0
    b = np.zeros(q.n)
    b[: xr.size + 1] = _from_roots(roots, xr.size + 1, q.coeffs[0]).real
    return b


def _newton_polish(c, b, iters: int = 30):
    """Newton on ``autocorrelation(b) = c`` in real arithmetic; keeps the best iterate."""
    n = b.size
    best_b, best = b, factor_residual_coeffs(c, b)
    if n < 2:
        return best_b
    for _ in range(iters):
        r = c - autocorrelation(b).real
        J = sl.toeplitz(np.r_[b[0], np.zeros(n - 1)], b) + sl.hankel(b, np.zeros(n))
        # truncated least squares: zeros on the circle make J nearly singular
        # and a plain solve drifts along the null direction
        try:
            d = np.linalg.lstsq(J, r, rcond=1e-10)[0]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(d)):
            break
        b = b + d
        e = factor_residual_coeffs(c, b)
        if e < best:
            best_b, best = b, e
        if np.max(np.abs(d)) <= 1e-16 * max(1.0, np.max(np.abs(b))):
            break
    return best_b


def _factor_cepstral(q: SymLaurentPoly, oversample: int = 32):
    n = q.n
    N = 1 << int(np.ceil(np.log2(max(4, oversample * n))))
    full = np.zeros(N)
    full[0] = q.coeffs[0]
    full[1:n] = q.coeffs[1:]
    full[N - n + 1 :] = q.coeffs[1:][::-1]
    vals = np.fft.fft(full).real
    if np.min(vals) <= 0:
        raise FactorizationError(f"cepstral factorization needs q > 0 on the circle (min sample {np.min(vals):.3e})")
    cep = np.fft.ifft(np.log(vals)).real
    h = np.zeros(N)
    h[0] = cep[0] / 2
    h[1 : N // 2] = cep[1 : N // 2]
    h[N // 2] = cep[N // 2] / 2
    pv = np.exp(N * np.fft.ifft(h))
    b = np.fft.fft(pv) / N
    b = b[:n]
    return b * np.sqrt(q.coeffs[0] / np.sum(np.abs(b) ** 2))


def factor_residual_coeffs(c, b) -> float:
    return float(np.max(np.abs(autocorrelation(b) - c)))


def factor_residual(q: SymLaurentPoly, b) -> float:
    """Max coefficient error of ``|p|^2`` against ``q``."""
    return factor_residual_coeffs(q.coeffs, b)


def spectral_factor(
    q: SymLaurentPoly,
    method: str = "auto",
    tol_fac: float = 1e-9,
    polish: bool = True,
) -> SpectralFactor:
    """Spectral factor of a nonnegative ``q`` with ``b_0`` real and >= 0.

    ``method`` is ``"roots"``, ``"cepstral"`` or ``"auto"`` (roots, then the
    cepstral iteration if the root-based residual exceeds ``tol_fac``).
    """
    if q.coeffs[0] <= 0:
        raise FactorizationError("constant coefficient must be positive")
    if method not in ("auto", "roots", "cepstral"):
        raise ValueError(f"unknown factorization method {method!r}")
    attempts = []
    if method in ("auto", "roots"):
        try:
            b = _factor_roots(q)
            if polish and q.n <= POLISH_MAX_N:
                b = _newton_polish(q.coeffs, b)
            b = _fix_phase(b)
            res = factor_residual(q, b)
            if method == "roots" or res <= tol_fac:
                return SpectralFactor(b, "roots", res)
            attempts.append(("roots", b, res))
        except (FactorizationError, np.linalg.LinAlgError) as exc:
            if method == "roots":
                raise
            log.info("root-based factorization failed (%s); trying cepstral", exc)
    try:
        b = _fix_phase(_factor_cepstral(q))
        attempts.append(("cepstral", b, factor_residual(q, b)))
    except FactorizationError:
        if not attempts:
            raise
    name, b, res = min(attempts, key=lambda a: a[2])
    return SpectralFactor(b, name, res)


def fejer_factor(n: int) -> SpectralFactor:
    """Closed form ``(1 + z + ... + z^{n-1}) / sqrt(n)``."""
    return SpectralFactor(np.full(n, 1.0 / np.sqrt(n)), "analytic", 0.0)


def gram_rank1(p: SpectralFactor) -> np.ndarray:
    """``Q = conj(b) b^T``, so that ``tr_j(Q)`` are the coefficients of ``|p|^2``."""
    b = p.coeffs
    return np.outer(np.conj(b), b)


# ---------------------------------------------------------------- verification


@dataclass
class SdpSolutionReport:
    epsilon: float
    initial_residual: float
    forward_residuals: list
    final_entry: float
    final_residual: float
    trace_residuals: list
    psd_margins: list
    passed: bool
    eps_eq: float = EPS_EQ
    tol_psd: float = TOL_PSD
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "initial_residual": self.initial_residual,
            "forward_residuals": self.forward_residuals,
            "final_entry": self.final_entry,
            "final_residual": self.final_residual,
            "trace_residuals": self.trace_residuals,
            "psd_margins": self.psd_margins,
            "passed": self.passed,
            "eps_eq": self.eps_eq,
            "tol_psd": self.tol_psd,
            "failures": self.failures,
        }


def _step_traces(Q, t):
    # tr_j(Q) + (-1)^t tr_{j-n}(Q) for 0 < j < n
    n = Q.shape[0]
    s = (-1) ** t
    out = np.empty(n - 1, dtype=complex)
    for j in range(1, n):
        out[j - 1] = np.trace(Q, offset=j) + s * np.trace(Q, offset=j - n)
    return out


def _min_eig(Q):
    # rank-one Gram matrices: eigenvalues are 0 (n-1 times) and |b|^2
    return float(np.min(np.linalg.eigvalsh(Q))) if Q.shape[0] <= 1024 else float("nan")


def verify_clp_solution(factors, epsilon: float = 0.0, eps_eq: float = EPS_EQ, tol_psd: float = TOL_PSD) -> SdpSolutionReport:
    """Check the Gram matrices of ``factors`` against the exact-search SDP constraints."""
    factors = tuple(factors)
    if len(factors) < 2:
        raise ValueError("need factors p_0 .. p_k with k >= 1")
    n = factors[0].n
    if any(p.n != n for p in factors):
        raise ValueError("factors have different lengths")
    k = len(factors) - 1
    Qs = [gram_rank1(p) for p in factors]
    init = float(np.max(np.abs(Qs[0] - np.full((n, n), 1.0 / n))))
    fwd, traces, psd = [], [], []
    for t in range(1, k + 1):
        if n > 1:
            d = _step_traces(Qs[t], t) - _step_traces(Qs[t - 1], t)
            fwd.append(float(np.max(np.abs(d))))
        else:
            fwd.append(0.0)
        traces.append(float(abs(np.trace(Qs[t]) - 1.0)))
        m = _min_eig(Qs[t])
        if np.isnan(m):
            # rank one by construction; the spectrum is {0, |b|^2}
            m = 0.0
        psd.append(m)
    final = float(Qs[k][0, 0].real)
    final_res = max(0.0, (1.0 - epsilon) - final)
    failures = []
    if init > eps_eq:
        failures.append(f"initial matrix differs from J/n by {init:.3e}")
    for t, r in enumerate(fwd, 1):
        if r > eps_eq:
            failures.append(f"forward step {t} residual {r:.3e}")
    for t, r in enumerate(traces, 1):
        if r > eps_eq:
            failures.append(f"trace of Q^{t} off by {r:.3e}")
    for t, m in enumerate(psd, 1):
        if m < -tol_psd:
            failures.append(f"Q^{t} has eigenvalue {m:.3e}")
    if final < 1.0 - epsilon - eps_eq:
        failures.append(f"Q^k[0,0] = {final:.12g} < 1 - epsilon")
    return SdpSolutionReport(
        epsilon=epsilon,
        initial_residual=init,
        forward_residuals=fwd,
        final_entry=final,
        final_residual=final_res,
        trace_residuals=traces,
        psd_margins=psd,
        passed=not failures,
        eps_eq=eps_eq,
        tol_psd=tol_psd,
        failures=failures,
    )


def verify_final_probability(p_k: SpectralFactor, epsilon: float = 0.0, eps_eq: float = EPS_EQ) -> bool:
    return bool(abs(p_k.coeffs[0]) ** 2 >= 1.0 - epsilon - eps_eq)


def initial_constraint_residual(A) -> float:
    """``max_l |tr_l(A) + tr_{n-l}(A) - 1|`` over ``0 <= l < n``."""
    A = np.asarray(A)
    n = A.shape[0]
    worst = abs(np.trace(A) - 1.0)
    for l in range(1, n):
        worst = max(worst, abs(np.trace(A, offset=l) + np.trace(A, offset=n - l) - 1.0))
    return float(worst)


def check_unique_initial(A, eps_eq: float = EPS_EQ, tol_psd: float = TOL_PSD) -> bool:
    """Whether a matrix meeting the initial-step constraints equals ``J_n / n``.

    Raises :class:`PreconditionError` if ``A`` is not Hermitian PSD (within
    ``tol_psd``) or misses the trace constraints by more than ``eps_eq``.  The
    uniqueness argument is stable: a defect ``d`` in the hypotheses moves the
    solution by at most ``O(sqrt(n d))``, which sets the comparison tolerance.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise PreconditionError("expected a non-empty square matrix")
    n = A.shape[0]
    if np.max(np.abs(A - A.conj().T)) > eps_eq:
        raise PreconditionError("matrix is not Hermitian")
    lam = float(np.min(np.linalg.eigvalsh((A + A.conj().T) / 2)))
    if lam < -tol_psd:
        raise PreconditionError(f"matrix is not PSD (smallest eigenvalue {lam:.3e})")
    r = initial_constraint_residual(A)
    if r > eps_eq:
        raise PreconditionError(f"trace constraints violated by {r:.3e}")
    defect = r + max(0.0, -lam) + np.finfo(float).eps * n
    tol = 1e-12 + 4.0 * np.sqrt(n * defect)
    return bool(np.max(np.abs(A - 1.0 / n)) <= tol)


def factor_tuple(polys, method: str = "auto", analytic_endpoints: bool = True):
    """Factor every polynomial of a certified tuple.

    The endpoints are the Fejer kernel and the constant 1; their factors are
    known in closed form and used directly when ``analytic_endpoints``.
    """
    out = []
    k = len(polys) - 1
    for t, q in enumerate(polys):
        if analytic_endpoints and t == 0 and q == fejer_kernel(q.n):
            out.append(fejer_factor(q.n))
        elif analytic_endpoints and t == k and q == SymLaurentPoly.constant(q.n):
            out.append(SpectralFactor(np.eye(1, q.n)[0], "analytic", 0.0))
        else:
            out.append(spectral_factor(q, method))
    return tuple(out)
