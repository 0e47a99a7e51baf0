import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ffrace.errors import CapExceededError, PreconditionError
from ffrace.ffpoly import Poly, parse_poly, poly_gcd
from ffrace.smith import smith_normal_form
from ffrace.unitgroup import build_modulus, cm, cm_vector, is_quadratic_residue, phi_formula

from conftest import SMALL_CORPUS


def _order(mod, u):
    one = Poly.one(mod.p) % mod.m
    x, k = u.rep, 1
    while x != one:
        x = (x * u.rep) % mod.m
        k += 1
    return k


@pytest.mark.parametrize("ms,q", SMALL_CORPUS)
def test_group_structure(ms, q):
    mod = build_modulus(ms, q)
    units = mod.units()
    assert len(units) == mod.phi == phi_formula(mod.m)
    assert math.prod(mod.orders) == mod.phi
    # invariant factors form a descending divisibility chain
    assert all(a % b == 0 for a, b in zip(mod.orders, mod.orders[1:]))
    # brute-force unit count
    brute = sum(1 for c in range(q**mod.M) if poly_gcd(Poly.from_int(c, q), mod.m).degree == 0
                and not Poly.from_int(c, q).is_zero)
    assert brute == mod.phi
    # generators have the advertised orders
    for g, d in zip(mod.generators, mod.orders):
        assert _order(mod, mod.residue(g)) == d


@pytest.mark.parametrize("ms,q", SMALL_CORPUS)
def test_element_order_statistics_match_invariants(ms, q):
    """The multiset of element orders pins down the group up to isomorphism."""
    mod = build_modulus(ms, q)
    got = Counter(_order(mod, u) for u in mod.units())
    want = Counter()
    for y in np.ndindex(*mod.orders) if mod.orders else [()]:
        o = 1
        for v, d in zip(y, mod.orders):
            o = math.lcm(o, d // math.gcd(v, d))
        want[o] += 1
    assert got == want


@pytest.mark.parametrize("ms,q", SMALL_CORPUS)
def test_dlog_is_a_homomorphism(ms, q):
    mod = build_modulus(ms, q)
    units = mod.units()
    rng = np.random.default_rng(1)
    for _ in range(40):
        a, b = (units[i] for i in rng.integers(0, len(units), 2))
        prod = (a.rep * b.rep) % mod.m
        assert mod.residue(prod) == mod.mul(a, b)
        assert (mod.inv(a).rep * a.rep) % mod.m == Poly.one(q) % mod.m
        assert mod.from_dlog(a.exps) == a


def test_examples_structure(ex1, ex3):
    assert ex1.phi == 6 and ex1.orders == (6,)
    assert ex3.phi == 8 and ex3.orders == (2, 2, 2)


@pytest.mark.parametrize("ms,q", SMALL_CORPUS)
def test_cm_counts_square_roots(ms, q):
    mod = build_modulus(ms, q)
    units = mod.units()
    squares = Counter(((u.rep * u.rep) % mod.m).to_int() for u in units)
    cv = cm_vector(mod)
    for i, u in enumerate(units):
        roots = squares.get(u.rep.to_int(), 0)
        assert cm(u, mod) == roots - 1 == cv[i]
        assert is_quadratic_residue(u, mod) == (roots > 0)


def test_cm_on_example_three(ex3):
    # every unit of (F_3[T]/(T^3-T))^* is +-1 in each coordinate
    assert cm("1", ex3) == 7
    assert cm("T^2+1", ex3) == -1


def test_rejects_bad_input():
    with pytest.raises(PreconditionError):
        build_modulus("2*T^2+1", 3)
    with pytest.raises(PreconditionError):
        build_modulus("1", 3)
    with pytest.raises(CapExceededError):
        build_modulus("T^9+T+2", 3, phi_cap=1000)
    mod = build_modulus("T^2+T+1", 3)
    with pytest.raises(PreconditionError):
        mod.residue("T+2")  # T+2 = T-1 divides T^2+T+1 over F_3


@given(st.lists(st.lists(st.integers(-20, 20), min_size=3, max_size=3), min_size=2, max_size=4))
def test_smith_normal_form(rows):
    U, D, V = smith_normal_form(rows)
    A = np.array(rows, dtype=object)
    assert (np.array(U, dtype=object) @ A @ np.array(V, dtype=object) == np.array(D, dtype=object)).all()
    diag = [D[i][i] for i in range(min(len(D), len(D[0])))]
    assert all(d >= 0 for d in diag)
    nz = [d for d in diag if d]
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))
    off = [D[i][j] for i in range(len(D)) for j in range(len(D[0])) if i != j]
    assert not any(off)


def test_reduce_accepts_strings_and_ints(ex1):
    assert ex1.reduce("T^2") == parse_poly("2*T+2", 3)
    assert ex1.reduce(4) == Poly.one(3)
