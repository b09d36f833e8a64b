import functools

import pytest
from hypothesis import HealthCheck, settings

from osearch.certify import refine_loop
from osearch.driver import postprocess

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


@functools.lru_cache(maxsize=None)
def refined(n, k):
    """Certificate of ``refine_loop(n, k)``, factored and simulated when FEASIBLE."""
    cert = refine_loop(n, k)
    if cert.verdict.value == "FEASIBLE":
        postprocess(cert)
    return cert


@functools.lru_cache(maxsize=None)
def conic(n, k):
    from osearch.sdpa import build_clp_sdp, solve_sdpa

    return solve_sdpa(build_clp_sdp(n, k, 0.0))


@pytest.fixture(scope="session")
def certs():
    return refined


@pytest.fixture(scope="session")
def conic_check():
    return conic
