"""State-vector simulation of translation-invariant ordered-search algorithms.

Position space has ``2n`` sites.  Momentum ``m`` is the Fourier mode
``omega^(-m x) / sqrt(2n)`` with ``omega = exp(2 pi i / 2n)``, so the
momentum amplitudes of a state ``psi`` are ``ifft(psi, norm="ortho")`` and
``z_m = omega^m`` satisfies ``z_m^n = (-1)^m``.  The sign of the kernel is
fixed by the ``(n, k) = (2, 1)`` instance, which must succeed with
certainty; the opposite sign sends it to probability 0.  Each inter-query unitary is
diagonal in momentum space; the oracle for the shifted input ``T^j w`` with
``w = 1^n 0^n`` is diagonal in position space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralFactor

TAU_ZERO = 1e-9
EPS_EQ = 1e-8
EPS_SIM = 1e-6


class InvalidCertificateError(ValueError):
    """Factors fail the modulus equalities that make the phases unitary."""


@dataclass(frozen=True, eq=False)
class AlgorithmSpec:
    n: int
    k: int
    phases: np.ndarray  # (k, 2n) unit-modulus momentum diagonals

    def __post_init__(self):
        ph = np.array(self.phases, dtype=complex, copy=True).reshape(self.k, 2 * self.n)
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)

    def unitary_apply(self, t: int, psi: np.ndarray) -> np.ndarray:
        """Apply ``U_t`` (1-based ``t``) to a position-space state."""
        return np.fft.fft(self.phases[t - 1] * np.fft.ifft(psi, norm="ortho"), norm="ortho")

    def to_pairs(self) -> list:
        return [[[float(v.real), float(v.imag)] for v in row] for row in self.phases]


def momentum_points(n: int) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(2 * n) / n)


def build_algorithm(factors, eps_eq: float = EPS_EQ, tau_zero: float = TAU_ZERO) -> AlgorithmSpec:
    """Phases ``d_t(m) = p_t(z_m) / p_(t-1)(z_m)`` on momenta with ``m = t (mod 2)``."""
    factors = tuple(factors)
    if len(factors) < 1:
        raise ValueError("need at least p_0")
    n = factors[0].n
    k = len(factors) - 1
    z = momentum_points(n)
    m = np.arange(2 * n)
    vals = [np.asarray(p(z)) for p in factors]
    phases = np.ones((k, 2 * n), dtype=complex)
    for t in range(1, k + 1):
        act = (m % 2) == (t % 2)
        num, den = vals[t][act], vals[t - 1][act]
        gap = np.max(np.abs(np.abs(num) ** 2 - np.abs(den) ** 2), initial=0.0)
        if gap > eps_eq:
            raise InvalidCertificateError(f"|p_{t}|^2 and |p_{t - 1}|^2 differ by {gap:.3e} on active momenta")
        d = np.ones(num.size, dtype=complex)
        ok = np.abs(den) >= tau_zero
        r = num[ok] / den[ok]
        d[ok] = r / np.abs(r)
        phases[t - 1, act] = d
    return AlgorithmSpec(n, k, phases)


def oracle_signs(n: int, j: int) -> np.ndarray:
    """``(-1)^{y_x}`` for ``y = T^j (1^n 0^n)``."""
    w = np.concatenate([-np.ones(n), np.ones(n)])
    return np.roll(w, j)


def run(spec: AlgorithmSpec, j: int, steps: int | None = None) -> np.ndarray:
    """Final position-space state for input shift ``j``; ``steps`` truncates after that many queries."""
    N = 2 * spec.n
    psi = np.full(N, 1.0 / np.sqrt(N), dtype=complex)
    sign = oracle_signs(spec.n, j)
    for t in range(1, (spec.k if steps is None else steps) + 1):
        psi = spec.unitary_apply(t, sign * psi)
    return psi


def measurement_vector(n: int, k: int, j: int) -> np.ndarray:
    phi = np.zeros(2 * n, dtype=complex)
    phi[j % n] = 1.0
    phi[j % n + n] = (-1.0) ** k
    return phi / np.sqrt(2.0)


@dataclass
class SimulationReport:
    probabilities: np.ndarray
    min_success: float
    norm_drift: float
    epsilon: float = 0.0
    eps_sim: float = EPS_SIM
    passed: bool = False
    worst_input: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "min_success": self.min_success,
            "norm_drift": self.norm_drift,
            "epsilon": self.epsilon,
            "eps_sim": self.eps_sim,
            "passed": self.passed,
            "worst_input": self.worst_input,
            "probabilities": [float(x) for x in self.probabilities],
        }


def success_report(spec: AlgorithmSpec, epsilon: float = 0.0, eps_sim: float = EPS_SIM) -> SimulationReport:
    n, N = spec.n, 2 * spec.n
    # all 2n inputs at once: column j is the state for shift j
    psi = np.full((N, N), 1.0 / np.sqrt(N), dtype=complex)
    signs = np.stack([oracle_signs(n, j) for j in range(N)], axis=1)
    for t in range(1, spec.k + 1):
        psi = np.fft.fft(spec.phases[t - 1][:, None] * np.fft.ifft(signs * psi, axis=0, norm="ortho"), axis=0, norm="ortho")
    drift = float(np.max(np.abs(np.linalg.norm(psi, axis=0) - 1.0)))
    j = np.arange(N)
    amp = (psi[j % n, j] + (-1.0) ** spec.k * psi[j % n + n, j]) / np.sqrt(2.0)
    prob = np.abs(amp) ** 2
    worst = int(np.argmin(prob))
    ms = float(prob[worst])
    return SimulationReport(prob, ms, drift, epsilon, eps_sim, bool(ms >= 1.0 - epsilon - eps_sim), worst)


def identity_spec(n: int, k: int) -> AlgorithmSpec:
    return AlgorithmSpec(n, k, np.ones((k, 2 * n), dtype=complex))


def random_spec(n: int, k: int, rng: np.random.Generator) -> AlgorithmSpec:
    return AlgorithmSpec(n, k, np.exp(2j * np.pi * rng.random((k, 2 * n))))


def simulate_factors(factors, epsilon: float = 0.0) -> SimulationReport:
    return success_report(build_algorithm(factors), epsilon)


def two_one_factors():
    """Hand factors of the ``(n, k) = (2, 1)`` instance."""
    return (SpectralFactor(np.array([1.0, 1.0]) / np.sqrt(2.0)), SpectralFactor(np.array([1.0, 0.0])))
