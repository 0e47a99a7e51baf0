"""Dirichlet characters mod m as exponent vectors on the unit-group basis.

A character with exponents ``e`` sends the unit with discrete log ``y`` to
``exp(2*pi*i * sum(e_i * y_i / d_i))``.  Values are kept as exact angles
(fractions of a full turn); the integer ``k`` in ``k / exponent`` is what all
vectorized routines use.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .ffpoly import Poly, coeff_matrix, encode_rows, factor, poly_gcd
from .smith import smith_normal_form
from .unitgroup import Modulus, ResidueClass, phi_formula


@dataclass(frozen=True)
class Character:
    """A Dirichlet character mod m.

    ``index`` is the position in :func:`all_characters`; ``conductor`` is the
    monic conductor m(chi*) and ``even`` means trivial on the constants.
    """

    modulus: Modulus = field(repr=False, compare=False, hash=False)
    exps: tuple[int, ...]
    index: int
    order: int
    conductor: Poly
    even: bool

    @property
    def conductor_degree(self) -> int:
        return self.conductor.degree

    @property
    def is_principal(self) -> bool:
        return not any(self.exps)

    @property
    def parity(self) -> str:
        return "even" if self.even else "odd"

    def angle(self, a) -> Fraction | None:
        """Value as a fraction of a full turn, or None when a is not a unit."""
        return char_angle(self, a)

    def __call__(self, a) -> complex:
        return evaluate(self, a)


def _scaled_exps(mod: Modulus, E: np.ndarray) -> np.ndarray:
    """Exponents rescaled so that angles are integers mod the group exponent."""
    D = mod.exponent
    w = np.array([D // d for d in mod.orders], dtype=np.int64)
    return (np.asarray(E, dtype=np.int64) * w) % D


def angle_numerators(mod: Modulus, E: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Integer angles (mod exponent) of characters E (rows) at dlogs Y (rows)."""
    if mod.rank == 0:
        return np.zeros((len(E), len(Y)), dtype=np.int64)
    return (_scaled_exps(mod, E) @ np.asarray(Y, dtype=np.int64).T) % mod.exponent


def exponent_matrix(mod: Modulus) -> np.ndarray:
    """Exponent vectors of all characters in canonical (C-order) sequence."""
    k = mod.rank
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices(mod.orders).reshape(k, -1).T
    return grids.astype(np.int64)


def _primitive_root(p: int) -> int:
    for g in range(2, p + 1):
        if all(pow(g, (p - 1) // r, p) != 1 for r in _prime_divs(p - 1)):
            return g % p
    return 1


def _prime_divs(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _subgroup_size(mod: Modulus, S: list[list[int]]) -> int:
    k = mod.rank
    rows = [list(s) for s in S] + [[d if i == j else 0 for j in range(k)] for i, d in enumerate(mod.orders)]
    _, D, _ = smith_normal_form(rows)
    index = 1
    for i in range(k):
        index *= D[i][i]
    return mod.phi // index


def _generators_of(mod: Modulus, Y: np.ndarray, size: int, seed: int = 0) -> np.ndarray:
    """A small generating set for the subgroup listed by dlog rows ``Y``."""
    if size == 1 or mod.rank == 0:
        return np.zeros((0, mod.rank), dtype=np.int64)
    rng = random.Random(seed)
    chosen: list[list[int]] = []
    for _ in range(8 * mod.rank + 64):
        y = [int(v) for v in Y[rng.randrange(len(Y))]]
        if _subgroup_size(mod, chosen + [y]) > (_subgroup_size(mod, chosen) if chosen else 1):
            chosen.append(y)
            if _subgroup_size(mod, chosen) == size:
                return np.array(chosen, dtype=np.int64)
    return np.asarray(Y, dtype=np.int64)  # pragma: no cover - fall back to all elements


def _local_kernel(mod: Modulus, P: Poly, e: int, c: int) -> np.ndarray:
    """Dlogs of units u with u = 1 mod m/P^e and u = 1 mod P^c."""
    p = mod.p
    base = (mod.m // P**e) * P**c
    free = mod.M - base.degree
    h = np.arange(p**free, dtype=np.int64)
    H = coeff_matrix(h, p, free)
    # coefficient rows of base * h, plus one
    B = np.zeros((free, mod.M), dtype=np.int64)
    for i in range(free):
        B[i, i : i + base.degree + 1] = base.coeffs
    U = (H @ B) % p
    U[:, 0] = (U[:, 0] + 1) % p
    idx = mod.index_of_codes(encode_rows(U, p))
    idx = idx[idx >= 0]
    return mod.dlogs[idx]


def _conductor_exponents(mod: Modulus, E: np.ndarray) -> list[np.ndarray]:
    """Per prime factor, the local conductor exponent of every character."""
    D = mod.exponent
    out = []
    for j, (P, e) in enumerate(mod.factorization.factors):
        cexp = np.full(len(E), e, dtype=np.int64)
        # kernels shrink as c grows, so scan c downward
        for c in range(e - 1, -1, -1):
            Y = _local_kernel(mod, P, e, c)
            gens = _generators_of(mod, Y, len(Y), seed=j * 97 + c)
            if len(gens) == 0:
                trivial = np.ones(len(E), dtype=bool)
            else:
                trivial = (angle_numerators(mod, E, gens) % D == 0).all(axis=1)
            cexp = np.where(trivial & (cexp == c + 1), c, cexp)
        out.append(cexp)
    return out


def all_characters(mod: Modulus) -> list[Character]:
    """All phi(m) characters, principal first, ordered by exponent vector."""
    cached = mod.__dict__.get("_characters")
    if cached is not None:
        return cached
    E = exponent_matrix(mod)
    D = mod.exponent
    # order of chi = D / gcd(D, scaled exponents)
    S = _scaled_exps(mod, E)
    orders = D // np.gcd.reduce(np.c_[S, np.full(len(E), D)], axis=1)
    cexps = _conductor_exponents(mod, E)
    g = _primitive_root(mod.p)
    yg = np.array([mod.dlog(g)], dtype=np.int64)
    even = (angle_numerators(mod, E, yg)[:, 0] == 0) if mod.rank else np.ones(1, dtype=bool)
    primes = [P for P, _ in mod.factorization.factors]
    cond_cache: dict[tuple[int, ...], Poly] = {}
    chars = []
    for i in range(len(E)):
        key = tuple(int(c[i]) for c in cexps)
        f = cond_cache.get(key)
        if f is None:
            f = Poly.one(mod.p)
            for P, c in zip(primes, key):
                f = f * P**c
            cond_cache[key] = f
        chars.append(
            Character(
                modulus=mod,
                exps=tuple(int(x) for x in E[i]),
                index=i,
                order=int(orders[i]),
                conductor=f,
                even=bool(even[i]),
            )
        )
    mod.__dict__["_characters"] = chars
    return chars


def char_angle(chi: Character, a) -> Fraction | None:
    mod = chi.modulus
    if isinstance(a, ResidueClass):
        y = a.exps
    else:
        r = mod.reduce(a)
        idx = int(mod.index_of_codes([r.to_int()])[0])
        if idx < 0:
            return None
        y = tuple(int(v) for v in mod.dlogs[idx])
    return Fraction(sum(e * v * (mod.exponent // d) for e, v, d in zip(chi.exps, y, mod.orders)) % mod.exponent, mod.exponent)


def evaluate(chi: Character, a) -> complex:
    """chi(a), zero when a shares a factor with m."""
    t = char_angle(chi, a)
    if t is None:
        return 0j
    return exact_complex(t)


def exact_complex(t: Fraction) -> complex:
    """exp(2 pi i t), with exact values at multiples of 1/12 turn."""
    t = t % 1
    if (12 * t).denominator == 1:
        k = int(12 * t)
        s3 = math.sqrt(3) / 2
        table = [(1, 0), (s3, 0.5), (0.5, s3), (0, 1), (-0.5, s3), (-s3, 0.5),
                 (-1, 0), (-s3, -0.5), (-0.5, -s3), (0, -1), (0.5, -s3), (s3, -0.5)]
        re, im = table[k]
        return complex(re, im)
    x = 2 * math.pi * float(t)
    return complex(math.cos(x), math.sin(x))


def character_values(chi: Character) -> np.ndarray:
    """Complex values on all units, row-aligned with ``unit_codes``."""
    mod = chi.modulus
    k = angle_numerators(mod, np.array([chi.exps]), mod.dlogs)[0]
    return np.exp(2j * np.pi * k / mod.exponent)


def format_value(t: Fraction | None) -> str:
    """Exact text for exp(2 pi i t) when the order divides 12, else ``e(k/n)``."""
    if t is None:
        return "0"
    t = t % 1
    if (12 * t).denominator != 1:
        return f"e({t.numerator}/{t.denominator})"
    k = int(12 * t)
    names = ["1", "(√3+i)/2", "(1+√3i)/2", "i", "(-1+√3i)/2", "(-√3+i)/2",
             "-1", "(-√3-i)/2", "(-1-√3i)/2", "-i", "(1-√3i)/2", "(√3-i)/2"]
    return names[k]


def find_character(mod: Modulus, images: dict) -> Character:
    """The unique character with the prescribed angles on generating elements."""
    chars = all_characters(mod)
    hits = [c for c in chars if all(char_angle(c, a) == Fraction(t) % 1 for a, t in images.items())]
    if len(hits) != 1:
        raise PreconditionError(f"images determine {len(hits)} characters, expected exactly one")
    return hits[0]


def conductor(chi: Character) -> tuple[Poly, int]:
    return chi.conductor, chi.conductor.degree


# cyclotomic arithmetic for exact character sums

def _poly_divmod_int(a: list[int], b: list[int]) -> tuple[list[int], list[int]]:
    a = list(a)
    db = len(b) - 1
    q = [0] * max(len(a) - db, 1)
    for k in range(len(a) - 1, db - 1, -1):
        c = a[k]
        if c:
            q[k - db] = c  # b is monic
            for j in range(db + 1):
                a[k - db + j] -= c * b[j]
    return q, a[:db] if db else []


_CYCLO: dict[int, list[int]] = {}


def cyclotomic(n: int) -> list[int]:
    """Integer coefficients (little-endian) of the n-th cyclotomic polynomial."""
    if n in _CYCLO:
        return _CYCLO[n]
    f = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            f, r = _poly_divmod_int(f, cyclotomic(d))
            assert not any(r)
    while len(f) > 1 and f[-1] == 0:
        f.pop()
    _CYCLO[n] = f
    return f


def exact_root_sum(weights: dict[int, Fraction], D: int) -> Fraction | None:
    """sum_k w_k zeta_D^k as a rational, or None if it is irrational."""
    den = math.lcm(*(Fraction(w).denominator for w in weights.values())) if weights else 1
    # exact integer arithmetic in an object array; slices keep the loop short
    a = np.zeros(D, dtype=object)
    for k, w in weights.items():
        a[k % D] += int(Fraction(w) * den)
    phi_d = np.array(cyclotomic(D), dtype=object)
    db = len(phi_d) - 1
    for k in range(D - 1, db - 1, -1):
        c = a[k]
        if c:
            a[k - db : k + 1] -= c * phi_d
    rem = a[:db]
    if any(rem[1:]):
        return None
    return Fraction(int(rem[0]), den) if db else Fraction(0)


@dataclass(frozen=True)
class ConductorSumReport:
    lhs: Fraction | None
    rhs: Fraction
    equal: bool
    a: Poly | None


def conductor_sum_check(mod: Modulus, a=None) -> ConductorSumReport:
    """Compare sum_chi chi(a) M(chi*) with its closed form (exact, log-q units)."""
    chars = all_characters(mod)
    if a is None:
        lhs = Fraction(sum(c.conductor_degree for c in chars))
        rhs = mod.phi * (mod.M - sum(Fraction(P.degree, P.norm() - 1) for P, _ in mod.factorization.factors))
        return ConductorSumReport(lhs, rhs, lhs == rhs, None)
    r = mod.residue(a)
    if r.rep == Poly.one(mod.p) % mod.m:
        raise PreconditionError("a must not be congruent to 1")
    D = mod.exponent
    weights: dict[int, Fraction] = {}
    for c in chars:
        t = char_angle(c, r)
        k = int(t * D)
        weights[k] = weights.get(k, Fraction(0)) + c.conductor_degree
    lhs = exact_root_sum(weights, D)
    g = poly_gcd(mod.m, r.rep - 1)
    quot = mod.m // g
    fac = factor(quot)
    if len(fac.factors) == 1:
        lam = Fraction(fac.factors[0][0].degree)
    else:
        lam = Fraction(0)
    rhs = -mod.phi * lam / phi_formula(quot, fac) if quot.degree >= 1 else Fraction(0)
    return ConductorSumReport(lhs, rhs, lhs == rhs, r.rep)
