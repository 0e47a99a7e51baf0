import os

import pytest
from hypothesis import HealthCheck, settings

from ffrace.unitgroup import build_modulus

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EX1 = "T^2+T+1"
EX3 = "T^3+2*T"

# test corpus: squarefree, prime-power and mixed moduli over F_3 and F_5
CORPUS = [
    ("T^2+T+1", 3), ("T^3+2*T", 3), ("T^2", 3), ("T^3", 3), ("T^2+1", 3),
    ("T^3+2*T+1", 3), ("T^4+T+2", 3), ("T^4", 3), ("T^4+2*T^2+1", 3), ("T^5+T^3", 3),
    ("T^5+2*T+1", 3), ("T^6+T^4+T+2", 3), ("T^7+2*T^2+1", 3), ("T^8+2*T+2", 3),
    ("T^8+T^7+2*T^6+T^5+2*T^4+2*T^3+T+2", 3),
    ("T^2+2", 5), ("T^3+T+1", 5), ("T^2", 5), ("T^4+2", 5), ("T^2+T", 5), ("T^5+T+2", 5),
]
SMALL_CORPUS = [
    ("T^2+T+1", 3), ("T^3+2*T", 3), ("T^2", 3), ("T^3", 3), ("T^2+1", 3), ("T^3+2*T+1", 3),
    ("T^4+T+2", 3), ("T^4", 3), ("T^2+2", 5), ("T^2", 5), ("T^2+T", 5),
]

# LI-clean degree-8 modulus used for the sampling checks
MC_MODULUS = "T^8+T^7+2*T^6+T^5+2*T^4+2*T^3+T+2"
MC_DRAWS = 10**6
MC_SEED = 0


@pytest.fixture(scope="session")
def corpus():
    return [build_modulus(m, q) for m, q in CORPUS]


@pytest.fixture(scope="session")
def small_corpus():
    return [build_modulus(m, q) for m, q in SMALL_CORPUS]


@pytest.fixture(scope="session")
def ex1():
    return build_modulus(EX1, 3)


@pytest.fixture(scope="session")
def ex3():
    return build_modulus(EX3, 3)


@pytest.fixture(scope="session")
def mc_run():
    """One 10^6-draw antithetic run shared by the covariance and bias checks."""
    from ffrace.bias import build_spectrum, construct_biased_tuple
    from ffrace.densities import LimitingSampler, default_probes

    mod = build_modulus(MC_MODULUS, 3)
    spec = build_spectrum(mod)
    cons = construct_biased_tuple(mod, 3, "quadratic")
    probes = default_probes(spec, 3)
    res = LimitingSampler(spec, cons.tuple_a, MC_SEED).run(MC_DRAWS, probes=probes)
    return {"mod": mod, "spec": spec, "construction": cons, "probes": probes, "result": res}


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(n: int, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
