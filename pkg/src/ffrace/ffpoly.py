"""Polynomials over a prime field F_p.

A ``Poly`` is an immutable little-endian coefficient tuple together with the
characteristic.  Logarithmic arithmetic functions return exact ``Fraction``
values measured in units of ``log q``.

Residues of polynomials of degree < n are frequently encoded as integers
``sum(c_i * p**i)``; under that encoding the monic polynomials of degree ``n``
are exactly the integers in ``[p**n, 2 * p**n)``.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import PreconditionError, PolySyntaxError

__all__ = [
    "FieldConfig",
    "Poly",
    "Factorization",
    "parse_poly",
    "format_poly",
    "poly_arith",
    "poly_gcd",
    "is_irreducible",
    "factor",
    "enumerate_monics",
    "list_irreducibles",
    "count_irreducibles",
    "count_irreducibles_mobius",
    "count_irreducibles_sieve",
    "von_mangoldt",
    "lambda0",
    "mertens_sum",
    "prime_factor_sum",
    "mobius",
]

#: Largest number of degree-n candidates the irreducibility sieve will enumerate.
SIEVE_CAP = 5_000_000


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class FieldConfig:
    """Prime field F_p with p odd."""

    p: int

    def __post_init__(self) -> None:
        if not isinstance(self.p, int) or not _is_prime(self.p) or self.p == 2:
            raise PreconditionError(f"characteristic must be an odd prime, got {self.p!r}")

    @property
    def q(self) -> int:
        return self.p


def _trim(coeffs: Sequence[int], p: int) -> tuple[int, ...]:
    c = [int(x) % p for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True, eq=True)
class Poly:
    """Polynomial over F_p, little-endian coefficients without trailing zeros."""

    coeffs: tuple[int, ...]
    p: int

    def __init__(self, coeffs: Sequence[int], p: int):
        object.__setattr__(self, "coeffs", _trim(coeffs, p))
        object.__setattr__(self, "p", int(p))

    # construction helpers
    @classmethod
    def zero(cls, p: int) -> "Poly":
        return cls((), p)

    @classmethod
    def one(cls, p: int) -> "Poly":
        return cls((1,), p)

    @classmethod
    def constant(cls, c: int, p: int) -> "Poly":
        return cls((c,), p)

    @classmethod
    def monomial(cls, k: int, p: int, c: int = 1) -> "Poly":
        return cls((0,) * k + (c,), p)

    @classmethod
    def from_int(cls, code: int, p: int) -> "Poly":
        """Decode the base-p integer encoding."""
        c = []
        code = int(code)
        while code:
            code, r = divmod(code, p)
            c.append(r)
        return cls(c, p)

    def to_int(self) -> int:
        v = 0
        for c in reversed(self.coeffs):
            v = v * self.p + c
        return v

    # basic properties
    @property
    def degree(self) -> int:
        """Degree, with -1 standing in for the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    @property
    def is_monic(self) -> bool:
        return self.leading == 1

    def norm(self) -> int:
        """|f| = q^deg f, and 0 for the zero polynomial."""
        return 0 if self.is_zero else self.p ** self.degree

    def sort_key(self) -> tuple:
        return (self.degree, self.coeffs)

    def monic(self) -> "Poly":
        if self.is_zero:
            return self
        inv = pow(self.leading, -1, self.p)
        return Poly([c * inv for c in self.coeffs], self.p)

    def __lt__(self, other: "Poly") -> bool:
        return self.sort_key() < other.sort_key()

    # arithmetic
    def _check(self, other: "Poly") -> None:
        if self.p != other.p:
            raise PreconditionError("polynomials over different fields")

    def _lift(self, other) -> "Poly":
        if isinstance(other, int):
            return Poly((other,), self.p)
        self._check(other)
        return other

    def __add__(self, other) -> "Poly":
        other = self._lift(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return Poly([x + y for x, y in zip(a, b)], self.p)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly([-c for c in self.coeffs], self.p)

    def __sub__(self, other) -> "Poly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Poly":
        return self._lift(other) - self

    def __mul__(self, other) -> "Poly":
        other = self._lift(other)
        if self.is_zero or other.is_zero:
            return Poly((), self.p)
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Poly(out, self.p)

    __rmul__ = __mul__

    def __divmod__(self, other: "Poly") -> tuple["Poly", "Poly"]:
        other = self._lift(other)
        if other.is_zero:
            raise ZeroDivisionError("division by the zero polynomial")
        p = self.p
        r = list(self.coeffs)
        db = other.degree
        inv = pow(other.leading, -1, p)
        qt = [0] * max(len(r) - db, 0)
        bc = other.coeffs
        for k in range(len(r) - 1, db - 1, -1):
            c = r[k] % p
            if c:
                f = c * inv % p
                qt[k - db] = f
                for j in range(db + 1):
                    r[k - db + j] -= f * bc[j]
        return Poly(qt, p), Poly(r[:db] if db > 0 else [], p)

    def __floordiv__(self, other) -> "Poly":
        return divmod(self, other)[0]

    def __mod__(self, other) -> "Poly":
        return divmod(self, other)[1]

    def powmod(self, e: int, m: "Poly") -> "Poly":
        """self**e mod m by square and multiply."""
        if e < 0:
            raise PreconditionError("negative exponent")
        result = Poly.one(self.p) % m if m.degree > 0 else Poly.zero(self.p)
        base = self % m
        while e:
            if e & 1:
                result = (result * base) % m
            e >>= 1
            if e:
                base = (base * base) % m
        return result

    def __pow__(self, e: int) -> "Poly":
        if e < 0:
            raise PreconditionError("negative exponent")
        result = Poly.one(self.p)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def derivative(self) -> "Poly":
        return Poly([i * c for i, c in enumerate(self.coeffs)][1:], self.p)

    def __call__(self, x: int) -> int:
        v = 0
        for c in reversed(self.coeffs):
            v = (v * x + c) % self.p
        return v

    def __str__(self) -> str:
        return format_poly(self)

    def __repr__(self) -> str:
        return f"Poly({format_poly(self)!r}, p={self.p})"


@dataclass(frozen=True)
class Factorization:
    """``unit * prod(P**e for P, e in factors)``."""

    unit: int
    factors: tuple[tuple[Poly, int], ...]

    def expand(self, p: int) -> Poly:
        out = Poly.constant(self.unit, p)
        for P, e in self.factors:
            out = out * P**e
        return out

    @property
    def primes(self) -> list[Poly]:
        return [P for P, _ in self.factors]


# text interface

_TERM = re.compile(r"([+-])?(\d+)?(\*)?(?:([Tt])(?:\^(\d+))?)?")


def parse_poly(text: str, field: FieldConfig | int) -> Poly:
    """Parse ``c*T^k`` terms joined by ``+``/``-``.

    >>> parse_poly("2*T^3+T", 3).coeffs
    (0, 1, 0, 2)
    """
    p = field.p if isinstance(field, FieldConfig) else int(field)
    s = "".join(str(text).split())
    if not s:
        raise PolySyntaxError("empty polynomial")
    coeffs: dict[int, int] = {}
    pos = 0
    first = True
    while pos < len(s):
        m = _TERM.match(s, pos)
        if m is None or m.end() == pos:
            raise PolySyntaxError(f"cannot parse {text!r} at offset {pos}")
        sign, num, star, var, exp = m.groups()
        if sign is None and not first:
            raise PolySyntaxError(f"missing operator in {text!r} at offset {pos}")
        if num is None and var is None:
            raise PolySyntaxError(f"dangling sign in {text!r} at offset {pos}")
        if star and var is None:
            raise PolySyntaxError(f"'*' without variable in {text!r}")
        if exp is not None and var is None:
            raise PolySyntaxError(f"exponent without variable in {text!r}")
        c = int(num) if num is not None else 1
        if sign == "-":
            c = -c
        k = (int(exp) if exp is not None else 1) if var else 0
        coeffs[k] = coeffs.get(k, 0) + c
        pos = m.end()
        first = False
    if pos != len(s):
        raise PolySyntaxError(f"trailing characters in {text!r}")
    n = max(coeffs) + 1
    return Poly([coeffs.get(i, 0) for i in range(n)], p)


def format_poly(f: Poly) -> str:
    """Canonical text: descending powers, coefficients in [0, p-1]."""
    if f.is_zero:
        return "0"
    parts = []
    for k in range(f.degree, -1, -1):
        c = f.coeffs[k]
        if c == 0:
            continue
        if k == 0:
            parts.append(str(c))
            continue
        mono = "T" if k == 1 else f"T^{k}"
        parts.append(mono if c == 1 else f"{c}*{mono}")
    return "+".join(parts)


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd; gcd(0, 0) = 0."""
    while not b.is_zero:
        a, b = b, a % b
    return a.monic()


def poly_arith(a: Poly, b: Poly, op: str, exponent: int | None = None):
    """Dispatch on ``op`` in {add, sub, mul, divrem, gcd, modpow}.

    For ``modpow`` the result is ``a**exponent mod b``.
    """
    a._check(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "divrem":
        return divmod(a, b)
    if op == "gcd":
        return poly_gcd(a, b)
    if op == "modpow":
        if exponent is None:
            raise PreconditionError("modpow needs an exponent")
        if b.is_zero:
            raise ZeroDivisionError("division by the zero polynomial")
        return a.powmod(exponent, b)
    raise PreconditionError(f"unknown op {op!r}")


# irreducibility and factorization

def _prime_divisors(n: int) -> list[int]:
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


def is_irreducible(f: Poly) -> bool:
    """Rabin's test for a monic polynomial of positive degree."""
    if f.degree < 1:
        raise PreconditionError("irreducibility needs positive degree")
    n = f.degree
    if n == 1:
        return True
    p = f.p
    T = Poly.monomial(1, p)
    # T^(p^k) mod f via repeated Frobenius
    frob = [T % f]
    for _ in range(n):
        frob.append(frob[-1].powmod(p, f))
    if not (frob[n] - frob[0]).is_zero:
        return False
    for r in _prime_divisors(n):
        g = poly_gcd(frob[n // r] - T, f)
        if g.degree > 0:
            return False
    return True


def _pth_root(f: Poly) -> Poly:
    p = f.p
    return Poly([f.coeffs[i] for i in range(0, len(f.coeffs), p)], p)


def _squarefree(f: Poly) -> list[tuple[Poly, int]]:
    """Squarefree decomposition of a monic f: list of (g, multiplicity)."""
    out: list[tuple[Poly, int]] = []
    if f.degree < 1:
        return out
    p = f.p
    d = f.derivative()
    if d.is_zero:
        for g, e in _squarefree(_pth_root(f)):
            out.append((g, e * p))
        return out
    c = poly_gcd(f, d)
    w = f // c
    i = 1
    while w.degree > 0:
        y = poly_gcd(w, c)
        z = w // y
        if z.degree > 0:
            out.append((z.monic(), i))
        i += 1
        w, c = y, c // y
    if c.degree > 0:
        for g, e in _squarefree(_pth_root(c).monic()):
            out.append((g, e * p))
    return out


def _distinct_degree(f: Poly) -> list[tuple[Poly, int]]:
    p = f.p
    T = Poly.monomial(1, p)
    out = []
    h = T % f
    i = 0
    while f.degree >= 2 * (i + 1):
        i += 1
        h = h.powmod(p, f)
        g = poly_gcd(h - T, f)
        if g.degree > 0:
            out.append((g, i))
            f = f // g
            h = h % f
    if f.degree > 0:
        out.append((f.monic(), f.degree))
    return out


def _equal_degree(f: Poly, d: int, rng: random.Random) -> list[Poly]:
    if f.degree == d:
        return [f]
    p = f.p
    n = f.degree
    e = (p**d - 1) // 2
    for _ in range(64):
        a = Poly([rng.randrange(p) for _ in range(n)], p)
        if a.degree < 1:
            continue
        g = poly_gcd(a, f)
        if 0 < g.degree < n:
            break
        b = a.powmod(e, f) - 1
        g = poly_gcd(b, f)
        if 0 < g.degree < n:
            break
    else:  # pragma: no cover - probability 2**-64
        raise RuntimeError("equal-degree splitting did not converge")
    return _equal_degree(g, d, rng) + _equal_degree(f // g, d, rng)


def factor(f: Poly, seed: int = 0) -> Factorization:
    """Complete factorization into monic irreducibles.

    Squarefree, distinct-degree, then Cantor-Zassenhaus splitting driven by a
    ``random.Random(seed)`` stream.  Factors are sorted by (degree, coeffs).
    """
    if f.is_zero:
        raise PreconditionError("cannot factor the zero polynomial")
    unit = f.leading
    g = f.monic()
    rng = random.Random(seed)
    mult: dict[Poly, int] = {}
    for sf, e in _squarefree(g):
        for part, d in _distinct_degree(sf):
            for P in _equal_degree(part, d, rng):
                P = P.monic()
                mult[P] = mult.get(P, 0) + e
    factors = tuple(sorted(mult.items(), key=lambda t: t[0].sort_key()))
    return Factorization(unit, factors)


# enumeration

def enumerate_monics(n: int, p: int) -> Iterator[Poly]:
    """All p**n monic polynomials of degree n, ordered by (c_0, c_1, ...)."""
    if n < 0:
        raise PreconditionError("degree must be non-negative")
    for low in itertools.product(range(p), repeat=n):
        yield Poly(low + (1,), p)


def mobius(n: int) -> int:
    if n == 1:
        return 1
    out, d = 1, 2
    while d * d <= n:
        if n % d == 0:
            n //= d
            if n % d == 0:
                return 0
            out = -out
        d += 1
    return -out if n > 1 else out


def count_irreducibles_mobius(n: int, q: int) -> int:
    """Necklace formula (1/n) sum_{d|n} mu(d) q^(n/d)."""
    s = sum(mobius(d) * q ** (n // d) for d in range(1, n + 1) if n % d == 0)
    return s // n


def coeff_matrix(codes: np.ndarray, p: int, n: int) -> np.ndarray:
    """Rows of base-p digits (little-endian, ``n`` columns) of integer codes."""
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty((codes.size, n), dtype=np.int64)
    c = codes.copy()
    for i in range(n):
        c, out[:, i] = np.divmod(c, p)
    return out


def encode_rows(mat: np.ndarray, p: int) -> np.ndarray:
    """Inverse of :func:`coeff_matrix`."""
    n = mat.shape[1]
    w = p ** np.arange(n, dtype=np.int64)
    return mat.astype(np.int64) @ w


@lru_cache(maxsize=None)
def _irreducible_codes(n: int, p: int) -> np.ndarray:
    """Sorted codes of the monic irreducibles of degree n (vectorized sieve)."""
    size = p**n
    if size > SIEVE_CAP:
        raise PreconditionError(f"sieve for degree {n} over F_{p} exceeds the cap")
    composite = np.zeros(size, dtype=bool)
    weights = p ** np.arange(n, dtype=np.int64)
    for d in range(1, n // 2 + 1):
        e = n - d
        # all monic cofactors of degree e as coefficient rows
        H = coeff_matrix(np.arange(p**e, dtype=np.int64), p, e)
        H = np.concatenate([H, np.ones((H.shape[0], 1), dtype=np.int64)], axis=1)
        for g in _irreducible_codes(d, p):
            gc = coeff_matrix(np.array([g]), p, d + 1)[0]
            prod = np.zeros((H.shape[0], n + 1), dtype=np.int64)
            for k in range(d + 1):
                if gc[k]:
                    prod[:, k : k + e + 1] += gc[k] * H
            low = (prod[:, :n] % p) @ weights
            composite[low] = True
    return np.flatnonzero(~composite).astype(np.int64) + size


def list_irreducibles(n: int, p: int) -> Iterator[Poly]:
    """Monic irreducibles of degree n in enumeration order."""
    if n < 1:
        raise PreconditionError("degree must be at least 1")
    for code in _irreducible_codes(n, p):
        yield Poly.from_int(int(code), p)


def count_irreducibles_sieve(n: int, p: int) -> int:
    """pi_q(n) by enumeration; raises past the sieve cap."""
    if n < 1:
        raise PreconditionError("degree must be at least 1")
    return int(_irreducible_codes(n, p).size)


def count_irreducibles(n: int, p: int) -> int:
    """pi_q(n) via the necklace formula (exact; the sieve is kept as a cross-check)."""
    if n < 1:
        raise PreconditionError("degree must be at least 1")
    return count_irreducibles_mobius(n, p)


# arithmetic functions, exact in units of log q

def _prime_power_base(f: Poly) -> Poly | None:
    fac = factor(f)
    if len(fac.factors) == 1 and fac.unit == 1:
        return fac.factors[0][0]
    return None


def von_mangoldt(f: Poly) -> Fraction:
    """deg P if f = P^t for a monic irreducible P, else 0."""
    if f.degree < 1:
        return Fraction(0)
    P = _prime_power_base(f)
    return Fraction(P.degree) if P is not None else Fraction(0)


def lambda0(f: Poly) -> Fraction:
    """Lambda(f)/|f| in units of log q; zero for the zero polynomial."""
    if f.degree < 1:
        return Fraction(0)
    return von_mangoldt(f) / f.norm()


def mertens_sum(N: int, p: int) -> Fraction:
    """Sum of Lambda(f)/|f| over monic f with deg f <= N.

    The degree-k block equals sum_{d|k} d*pi_q(d) / q^k, which is 1 by the
    prime number theorem identity; it is still computed from the counts.
    """
    if N < 1:
        raise PreconditionError("N must be at least 1")
    total = Fraction(0)
    for k in range(1, N + 1):
        s = sum(d * count_irreducibles(d, p) for d in range(1, k + 1) if k % d == 0)
        total += Fraction(s, p**k)
    return total


def prime_factor_sum(m: Poly) -> Fraction:
    """sum_{P|m} deg P / (|P| - 1)."""
    if m.degree < 1:
        raise PreconditionError("modulus must have positive degree")
    return sum((Fraction(P.degree, P.norm() - 1) for P in factor(m).primes), Fraction(0))
