import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osearch.simulator import (
    AlgorithmSpec,
    InvalidCertificateError,
    build_algorithm,
    identity_spec,
    measurement_vector,
    momentum_points,
    oracle_signs,
    random_spec,
    run,
    simulate_factors,
    success_report,
    two_one_factors,
)
from osearch.spectral import SpectralFactor, fejer_factor

specs = st.builds(
    lambda n, k, seed: random_spec(n, k, np.random.default_rng(seed)),
    st.integers(1, 40),
    st.integers(1, 5),
    st.integers(0, 2**32 - 1),
)


def momentum(psi):
    return np.fft.ifft(psi, norm="ortho")


# ---------------------------------------------------------------- construction


def test_two_one_phases():
    spec = build_algorithm(two_one_factors())
    d = spec.phases[0]
    np.testing.assert_allclose(d, [1, np.exp(-1j * np.pi / 4), 1, np.exp(1j * np.pi / 4)], atol=1e-15)


def test_two_one_succeeds_with_certainty():
    rep = simulate_factors(two_one_factors())
    assert rep.min_success >= 1 - 1e-9
    assert rep.passed and rep.probabilities.size == 4


def test_pipeline_two_one_matches_hand_factors(certs):
    rep = simulate_factors(certs(2, 1).factors)
    assert rep.min_success >= 1 - 1e-9


def test_equal_factors_give_identity():
    f = fejer_factor(5)
    spec = build_algorithm((f, f, f))
    np.testing.assert_allclose(spec.phases, 1.0, atol=1e-15)


def test_modulus_violation_is_rejected():
    bad = (fejer_factor(4), SpectralFactor([1.0, 0, 0, 0]))
    with pytest.raises(InvalidCertificateError, match="differ"):
        build_algorithm(bad)


def test_zero_ratio_gets_unit_phase():
    # (1 + z)/sqrt 2 vanishes at z_2 = -1, an active momentum for t = 2 when n = 2
    p = SpectralFactor(np.array([1.0, 1.0]) / np.sqrt(2))
    spec = build_algorithm((p, p, p))
    assert abs(p(momentum_points(2)[2])) < 1e-15
    np.testing.assert_array_equal(spec.phases[1], np.ones(4))


@pytest.mark.parametrize("n,k", [(2, 1), (6, 2), (56, 3)])
def test_pipeline_phases_are_unimodular(certs, n, k):
    spec = build_algorithm(certs(n, k).factors)
    assert np.max(np.abs(np.abs(spec.phases) - 1)) <= 1e-10
    m = np.arange(2 * n)
    for t in range(1, k + 1):
        assert np.all(spec.phases[t - 1][m % 2 != t % 2] == 1)


# ---------------------------------------------------------------- execution


def test_no_queries_keeps_uniform():
    psi = run(identity_spec(4, 0), 3)
    np.testing.assert_allclose(psi, np.full(8, 1 / np.sqrt(8)))


@pytest.mark.parametrize("j", range(10))
def test_first_oracle_clears_momentum_zero(j):
    psi = oracle_signs(5, j) * np.full(10, 1 / np.sqrt(10))
    assert abs(momentum(psi)[0]) <= 1e-15


@settings(max_examples=30)
@given(specs, st.integers(0, 79))
def test_norm_is_preserved(spec, j):
    assert abs(np.linalg.norm(run(spec, j % (2 * spec.n))) - 1) <= 1e-12


def test_shift_and_complement_agree(certs):
    rep = success_report(build_algorithm(certs(6, 2).factors))
    n = 6
    np.testing.assert_allclose(rep.probabilities[:n], rep.probabilities[n:], atol=1e-12)


def test_random_spec_shifts_agree():
    rep = success_report(random_spec(7, 3, np.random.default_rng(5)))
    np.testing.assert_allclose(rep.probabilities[:7], rep.probabilities[7:], atol=1e-12)
    assert rep.norm_drift <= 1e-10
    assert np.all((rep.probabilities >= 0) & (rep.probabilities <= 1 + 1e-12))


def test_batched_report_matches_single_runs():
    spec = random_spec(5, 2, np.random.default_rng(1))
    rep = success_report(spec)
    for j in range(10):
        amp = np.vdot(measurement_vector(5, 2, j), run(spec, j))
        assert abs(amp) ** 2 == pytest.approx(rep.probabilities[j], abs=1e-13)


def test_fifty_six_three(certs):
    rep = simulate_factors(certs(56, 3).factors)
    assert rep.min_success >= 1 - 1e-6
    assert rep.norm_drift <= 1e-10


def test_identity_algorithm_fails():
    rep = success_report(identity_spec(8, 2))
    assert not rep.passed and rep.min_success < 0.5


# ---------------------------------------------------------------- properties


@settings(max_examples=40)
@given(specs, st.integers(0, 2**32 - 1))
def test_unitarity(spec, seed):
    rng = np.random.default_rng(seed)
    for t in range(1, spec.k + 1):
        for _ in range(20):
            v = rng.normal(size=2 * spec.n) + 1j * rng.normal(size=2 * spec.n)
            v /= np.linalg.norm(v)
            assert abs(np.linalg.norm(spec.unitary_apply(t, v)) - 1) <= 1e-12


@settings(max_examples=40)
@given(specs, st.integers(0, 2**32 - 1))
def test_translation_invariance(spec, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2 * spec.n) + 1j * rng.normal(size=2 * spec.n)
    for t in range(1, spec.k + 1):
        lhs = spec.unitary_apply(t, np.roll(v, 1))
        rhs = np.roll(spec.unitary_apply(t, v), 1)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


@settings(max_examples=40)
@given(st.integers(1, 40), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_parity_flow(n, k, seed):
    # phases only on active momenta, as build_algorithm emits them
    rng = np.random.default_rng(seed)
    m = np.arange(2 * n)
    ph = np.ones((k, 2 * n), dtype=complex)
    for t in range(1, k + 1):
        act = m % 2 == t % 2
        ph[t - 1, act] = np.exp(2j * np.pi * rng.random(act.sum()))
    spec = AlgorithmSpec(n, k, ph)
    j = int(rng.integers(0, 2 * n))
    for t in range(1, k + 1):
        mom = momentum(run(spec, j, steps=t))
        assert np.sum(np.abs(mom[m % 2 != t % 2]) ** 2) <= 1e-12
