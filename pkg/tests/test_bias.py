import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ffrace.bias import (
    SpectrumBundle,
    b_m,
    b_m_direct,
    b_m_predictor,
    build_spectrum,
    construct_biased_tuple,
    extremely_biased_classifier,
    first_moment_bm,
    lambda0_ratio,
    lambda0_triple_test,
    n_m,
    pair_sum_identity,
    race_report,
    xprime_var,
)
from ffrace.errors import PreconditionError
from ffrace.ffpoly import Poly, enumerate_monics, is_irreducible, parse_poly
from ffrace.lfunctions import all_l_data
from ffrace.unitgroup import build_modulus, cm, is_quadratic_residue

from conftest import MC_MODULUS, SMALL_CORPUS

S3 = math.sqrt(3)
# largest |B_m - predictor| / ((|a| + |b|) M^2) seen over classes of degree <= 2
# at degrees 8 and 9 (0.22 and 0.086); the bound below leaves room for drift
PREDICTOR_CONSTANT = 0.5


def P(s, p=3):
    return parse_poly(s, p)


def test_n_m_on_examples(ex1, ex3):
    assert n_m(build_spectrum(ex1)) == pytest.approx(1.5, abs=1e-12)
    assert n_m(build_spectrum(ex3)) == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("ms,q", SMALL_CORPUS)
def test_n_m_from_raw_zeros(ms, q):
    mod = build_modulus(ms, q)
    spec = build_spectrum(mod)
    total = 0.0
    for L in all_l_data(mod):
        for z in L.sqrt_q_zeros:
            if z.gamma.imag > 1e-9:
                total += z.multiplicity * abs(z.gamma / (z.gamma - 1)) ** 2
    assert n_m(spec) == pytest.approx(2 * total, rel=1e-12)


def test_b_m_values_on_example_one(ex1):
    spec = build_spectrum(ex1)
    assert b_m(spec, "T", "2*T") == pytest.approx(-1.5, abs=1e-12)
    assert b_m(spec, "T", "T+1") == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(PreconditionError):
        b_m(spec, "T", "T")


@pytest.mark.parametrize("ms,q", [("T^4+T+2", 3), ("T^4", 3), ("T^3+T+1", 5)])
def test_b_m_against_direct_sum(ms, q):
    mod = build_modulus(ms, q)
    spec = build_spectrum(mod)
    units = mod.units()

    @given(st.integers(0, len(units) - 1), st.integers(0, len(units) - 1), st.integers(0, len(units) - 1))
    def check(i, j, k):
        if i == j:
            return
        a, b, c = units[i], units[j], units[k]
        v = b_m(spec, a, b)
        assert v == pytest.approx(b_m_direct(spec, a, b), abs=1e-9)
        assert v == pytest.approx(b_m(spec, b, a), abs=1e-12)
        # depends only on the ratio a/b
        assert v == pytest.approx(b_m(spec, mod.mul(a, c), mod.mul(b, c)), abs=1e-9)

    check()


@pytest.mark.parametrize("ms,q", SMALL_CORPUS)
def test_pair_sum_identity(ms, q):
    lhs, rhs = pair_sum_identity(build_spectrum(build_modulus(ms, q)))
    assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(rhs))


def test_pair_sum_by_enumeration(ex3):
    spec = build_spectrum(ex3)
    units = ex3.units()
    total = sum(b_m(spec, a, b) for a, b in itertools.permutations(units, 2))
    assert total == pytest.approx(-ex3.phi * n_m(spec), abs=1e-9)


def test_covariance_example(ex1):
    # T = (T+1)^2 mod T^2+T+1, so T is a residue (C = 1) while T+1 is not (C = -1)
    assert ex1.reduce(P("T+1") ** 2) == P("T")
    rep = race_report(build_spectrum(ex1), ["T", "T+1"])
    k = 0.25 * ((3 - S3) / 2) ** 2
    assert list(rep.C) == [1, -1]
    assert rep.covariance[0, 0] == pytest.approx(1.5 + k, abs=1e-12)
    assert rep.covariance[1, 1] == pytest.approx(1.5 + k, abs=1e-12)
    assert rep.covariance[0, 1] == pytest.approx(0.75 - k, abs=1e-12)
    assert xprime_var(3) == pytest.approx(k, abs=1e-15)


@pytest.mark.parametrize("ms,q", SMALL_CORPUS)
def test_covariance_symmetric_psd(ms, q):
    mod = build_modulus(ms, q)
    spec = build_spectrum(mod)
    units = mod.units()
    rng = np.random.default_rng(3)
    for _ in range(5):
        r = min(4, mod.phi)
        idx = rng.choice(mod.phi, r, replace=False)
        cov = race_report(spec, [units[i] for i in idx]).covariance
        assert np.allclose(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-8 * np.trace(cov)


def test_li_flags(ex1):
    spec = build_spectrum(ex1)
    assert not spec.li_violation
    assert spec.li_diagnostics()["real_zeros"] == 0
    # the cube of T over F_3 has a real sqrt(q) zero
    spec3 = build_spectrum(build_modulus("T^3", 3))
    assert spec3.li_violation
    synthetic = SpectrumBundle(ex1, [], np.zeros(0, dtype=np.int64), np.zeros(0, dtype=complex), np.zeros(0),
                               np.zeros(ex1.phi), real_zeros=[(1, complex(S3, 0), 1)], multiple_zeros=[])
    assert synthetic.li_violation and not synthetic.li_diagnostics()["li_clean"]


def test_predictor_examples():
    mod = build_modulus(MC_MODULUS, 3)
    q, phi = 3, mod.phi
    one, minus = Poly.one(3), Poly.constant(2, 3)
    assert b_m_predictor(mod, one, minus) == pytest.approx(-(q * q + q) / (2 * (q - 1) ** 2) * phi)
    Pr = P("T+1")
    want = -q / ((q - 1) * math.log(q)) * phi * math.log(Pr.norm()) / Pr.norm() ** 2
    assert b_m_predictor(mod, one, Pr * Pr) == pytest.approx(want)
    assert b_m_predictor(mod, P("T"), P("T+1")) == 0.0
    assert math.copysign(1, b_m_predictor(mod, P("T^2+1"), P("T^2+T+2"))) == 1.0  # no negative zero


def test_predictor_tracks_b_m():
    mod = build_modulus(MC_MODULUS, 3)
    spec = build_spectrum(mod)
    cls = [Poly([c], 3) for c in (1, 2)] + [f * c for n in (1, 2) for f in enumerate_monics(n, 3) for c in (1, 2)]
    cls = [a for a in cls if not any((a % Q).is_zero for Q, _ in mod.factorization.factors)]
    worst = 0.0
    for a, b in itertools.combinations(cls, 2):
        d = abs(b_m(spec, a, b) - b_m_predictor(mod, a, b)) / ((a.norm() + b.norm()) * mod.M**2)
        worst = max(worst, d)
    assert worst <= PREDICTOR_CONSTANT


def test_lambda0_ratio():
    T, T1 = P("T"), P("T+1")
    assert lambda0_ratio(Poly.one(3), T1 * T1) == Fraction(1, 9)
    assert lambda0_ratio(T, T * T1) == Fraction(1, 3)
    assert lambda0_ratio(T, T1) == 0
    assert lambda0_ratio(Poly.one(3), Poly.constant(2, 3) * T1) == 0  # non-monic ratio


@pytest.mark.parametrize("ms", ["T^4+T+2", MC_MODULUS])
def test_first_moment(ms):
    mod = build_modulus(ms, 3)
    fm = first_moment_bm(mod)
    assert abs(fm.identity_lhs - fm.identity_rhs) <= 1e-6 * abs(fm.identity_rhs)
    spec = build_spectrum(mod)
    if mod.phi <= 100:
        vals = [abs(b_m(spec, a, b)) for a, b in itertools.permutations(mod.units(), 2)]
        assert fm.mean_abs == pytest.approx(np.mean(vals), rel=1e-10)
    if mod.M >= 6:
        assert fm.lower <= fm.mean_abs <= fm.upper


def test_first_moment_example_one(ex1):
    spec = build_spectrum(ex1)
    vals = [abs(b_m(spec, a, b)) for a, b in itertools.permutations(ex1.units(), 2)]
    assert len(vals) == 30
    assert first_moment_bm(ex1).mean_abs == pytest.approx(sum(vals) / 30, abs=1e-12)


def test_constructions():
    mod = build_modulus(MC_MODULUS, 3)
    c = construct_biased_tuple(mod, 3, "quadratic")
    P1, P2 = c.P1, c.P2
    assert c.tuple_a == (Poly.one(3), (P1 * P2) ** 4, P1 * P1)
    assert all(is_quadratic_residue(a, mod) for a in c.tuple_a)
    assert is_irreducible(P1) and is_irreducible(P2) and P1 != P2
    assert P1.norm() <= 2 * mod.q * mod.M and P2.norm() <= 2 * mod.q * mod.M
    g = construct_biased_tuple(mod, 3, "general")
    assert g.tuple_a[-1] == Poly.constant(2, 3)
    assert c.permuted() == (c.tuple_a[1], c.tuple_a[0], c.tuple_a[2])
    for r in (3, 4):
        m = construct_biased_tuple(mod, r, "martin_counterexample")
        assert len(m.tuple_a) == len(m.tuple_b) == r
        kappa = [0.0] * (r - 1) + [1.0]
        ca = sum(k * cm(a, mod) for k, a in zip(kappa, m.tuple_a))
        cb = sum(k * cm(b, mod) for k, b in zip(kappa, m.tuple_b))
        assert ca > cb


def test_construction_infeasible_is_explicit(ex1):
    with pytest.raises(PreconditionError, match="infeasible"):
        construct_biased_tuple(ex1, 3, "quadratic")


def test_classifier_examples():
    one, minus = Poly.one(3), Poly.constant(2, 3)
    P1, P2, Q1, Q2 = P("T"), P("T+1"), P("T+2"), P("T^2+1")
    assert extremely_biased_classifier([one, minus, P1], 4)[0] == "biased_by_negation"
    assert extremely_biased_classifier([one, P1 * P1, (P1 * P2) ** 4], 8)[0] == "biased_by_prime_power_ratio"
    assert extremely_biased_classifier([one, P1 * P2, P1 * P2 * Q1 * Q2], 8)[0] == "not_extreme"
    with pytest.raises(PreconditionError):
        extremely_biased_classifier([P1**5], 4)


@given(st.lists(st.sampled_from(["1", "2", "T", "2*T", "T^2", "T+1", "T^2+T", "T^2+1", "2*T^2+2"]),
                min_size=2, max_size=4, unique=True), st.randoms(use_true_random=False))
def test_classifier_permutation_invariant(names, rnd):
    cls = [P(s) for s in names]
    shuffled = list(cls)
    rnd.shuffle(shuffled)
    assert extremely_biased_classifier(cls, 3)[0] == extremely_biased_classifier(shuffled, 3)[0]


def test_lambda0_triple():
    T = P("T")
    perm, val = lambda0_triple_test(Poly.one(3), T, T * T)
    assert val != 0 and sorted(perm) == [1, 2, 3]
    assert (perm, val) == ((1, 2, 3), Fraction(4, 9))
    # ratios T(T+1), T^2+T... none a prime power
    a, b, c = Poly.one(3), P("T^2+T"), P("T^2+T") * P("T^2+T+2") * P("T")
    assert lambda0_triple_test(a, b, c) is None
