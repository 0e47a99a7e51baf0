"""The unit group (F_q[T]/m)^*: structure, discrete logs and C_m.

Residues are handled through their base-p integer codes (see ``ffpoly``).  The
group is enumerated once; a polycyclic basis is found greedily and turned into
invariant factors d_1, ..., d_k (each a multiple of the next) with a Smith
normal form.  Discrete logs are then table lookups.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CapExceededError, PreconditionError
from .ffpoly import Factorization, Poly, coeff_matrix, encode_rows, factor, parse_poly, poly_gcd
from .smith import smith_normal_form

DEFAULT_PHI_CAP = 2_000_000
RESIDUE_CAP = 20_000_000


@dataclass(frozen=True)
class ResidueClass:
    """A unit mod m stored by its reduced representative and its exponent vector."""

    rep: Poly
    exps: tuple[int, ...]

    @property
    def code(self) -> int:
        return self.rep.to_int()

    def __str__(self) -> str:
        return str(self.rep)


@dataclass(eq=False)
class Modulus:
    """Factored monic modulus with its unit-group tables.

    Attributes
    ----------
    m : Poly
    factorization : Factorization
    phi : int
    orders : tuple of int
        Invariant factors, ``orders[i+1]`` divides ``orders[i]``.
    generators : tuple of Poly
        ``generators[i]`` has exponent vector ``e_i``.
    unit_codes : ndarray
        Codes of all units in increasing order.
    dlogs : ndarray, shape (phi, k)
        Exponent vectors, row-aligned with ``unit_codes``.
    """

    m: Poly
    factorization: Factorization
    phi: int
    orders: tuple[int, ...]
    generators: tuple[Poly, ...]
    unit_codes: np.ndarray = field(repr=False)
    dlogs: np.ndarray = field(repr=False)
    _index_of_code: np.ndarray = field(repr=False)
    _code_of_flat: np.ndarray = field(repr=False)

    # basic data
    @property
    def p(self) -> int:
        return self.m.p

    @property
    def q(self) -> int:
        return self.m.p

    @property
    def M(self) -> int:
        return self.m.degree

    @property
    def rank(self) -> int:
        return len(self.orders)

    @property
    def exponent(self) -> int:
        return self.orders[0] if self.orders else 1

    @cached_property
    def strides(self) -> np.ndarray:
        k = len(self.orders)
        s = np.ones(k, dtype=np.int64)
        for i in range(k - 2, -1, -1):
            s[i] = s[i + 1] * self.orders[i + 1]
        return s

    @cached_property
    def dlog_table(self) -> dict[Poly, tuple[int, ...]]:
        return {
            Poly.from_int(int(c), self.p): tuple(int(x) for x in row)
            for c, row in zip(self.unit_codes, self.dlogs)
        }

    @cached_property
    def power_matrix(self) -> np.ndarray:
        """Row i holds the coefficients of T^i mod m for i < 4M (extended on demand)."""
        return self._powers(4 * max(self.M, 1))

    def _powers(self, n: int) -> np.ndarray:
        p, M = self.p, self.M
        out = np.zeros((n, M), dtype=np.int64)
        cur = Poly.one(p) % self.m
        T = Poly.monomial(1, p)
        for i in range(n):
            c = cur.coeffs
            out[i, : len(c)] = c
            cur = (cur * T) % self.m
        return out

    # conversions
    def reduce(self, f: Poly | int | str) -> Poly:
        if isinstance(f, str):
            f = parse_poly(f, self.p)
        elif isinstance(f, int):
            f = Poly.constant(f, self.p)
        if f.p != self.p:
            raise PreconditionError("polynomial over a different field")
        return f % self.m

    def reduce_coeff_rows(self, C: np.ndarray) -> np.ndarray:
        """Codes of the residues of polynomials given as coefficient rows."""
        n = C.shape[1]
        P = self.power_matrix
        if P.shape[0] < n:
            P = self._powers(n)
            self.__dict__["power_matrix"] = P
        return encode_rows((C @ P[:n]) % self.p, self.p)

    def index_of_codes(self, codes) -> np.ndarray:
        """Row index into ``unit_codes`` (-1 for non-units)."""
        return self._index_of_code[np.asarray(codes, dtype=np.int64)]

    def dlog(self, a: Poly | int | str | ResidueClass) -> tuple[int, ...]:
        if isinstance(a, ResidueClass):
            return a.exps
        code = self.reduce(a).to_int()
        idx = int(self._index_of_code[code])
        if idx < 0:
            raise PreconditionError(f"{a} is not coprime to {self.m}")
        return tuple(int(x) for x in self.dlogs[idx])

    def flat_of_dlogs(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        return (y % np.asarray(self.orders, dtype=np.int64)) @ self.strides if self.orders else np.zeros(y.shape[:-1], dtype=np.int64)

    @cached_property
    def flat_of_unit(self) -> np.ndarray:
        """Mixed-radix index of each unit (row-aligned with ``unit_codes``)."""
        return self.flat_of_dlogs(self.dlogs)

    def code_of_dlog(self, y: Sequence[int]) -> int:
        return int(self._code_of_flat[int(self.flat_of_dlogs(np.asarray(y)))])

    @property
    def code_of_flat(self) -> np.ndarray:
        return self._code_of_flat

    def residue(self, a: Poly | int | str | ResidueClass) -> ResidueClass:
        """Residue class of ``a``; raises if ``a`` is not a unit."""
        if isinstance(a, ResidueClass):
            return a
        r = self.reduce(a)
        return ResidueClass(r, self.dlog(r))

    def from_dlog(self, y: Sequence[int]) -> ResidueClass:
        code = self.code_of_dlog(y)
        return ResidueClass(Poly.from_int(code, self.p), tuple(int(v) % d for v, d in zip(y, self.orders)))

    def units(self) -> list[ResidueClass]:
        return [
            ResidueClass(Poly.from_int(int(c), self.p), tuple(int(x) for x in row))
            for c, row in zip(self.unit_codes, self.dlogs)
        ]

    def mul(self, a: ResidueClass, b: ResidueClass) -> ResidueClass:
        return self.from_dlog([x + y for x, y in zip(a.exps, b.exps)])

    def inv(self, a: ResidueClass) -> ResidueClass:
        return self.from_dlog([-x for x in a.exps])

    def __str__(self) -> str:
        return f"Modulus({self.m}, q={self.q}, phi={self.phi}, orders={self.orders})"


def _mult_matrix(g: Poly, m: Poly) -> np.ndarray:
    """Matrix whose row i holds the coefficients of g*T^i mod m."""
    M = m.degree
    out = np.zeros((M, M), dtype=np.int64)
    cur = g % m
    T = Poly.monomial(1, m.p)
    for i in range(M):
        out[i, : len(cur.coeffs)] = cur.coeffs
        cur = (cur * T) % m
    return out


def phi_formula(m: Poly, fac: Factorization | None = None) -> int:
    """|m| * prod(1 - 1/|P|), computed as prod |P|^(e-1) (|P| - 1)."""
    fac = fac or factor(m)
    out = 1
    for P, e in fac.factors:
        n = P.norm()
        out *= n ** (e - 1) * (n - 1)
    return out


def build_modulus(m: Poly | str, p: int | None = None, phi_cap: int = DEFAULT_PHI_CAP) -> Modulus:
    """Enumerate the unit group of F_p[T]/m and extract its invariant factors."""
    if isinstance(m, str):
        if p is None:
            raise PreconditionError("a characteristic is needed to parse the modulus")
        m = parse_poly(m, p)
    p = m.p
    if m.degree < 1 or not m.is_monic:
        raise PreconditionError("modulus must be monic of positive degree")
    fac = factor(m)
    phi = phi_formula(m, fac)
    if phi > phi_cap:
        raise CapExceededError(f"modulus too large: phi(m) = {phi} exceeds cap {phi_cap}")
    M = m.degree
    size = p**M
    if size > RESIDUE_CAP:
        raise CapExceededError(f"modulus too large: {size} residues")

    all_codes = np.arange(size, dtype=np.int64)
    C = coeff_matrix(all_codes, p, M)
    # a residue is a unit iff it is nonzero modulo every prime factor
    is_unit = np.ones(size, dtype=bool)
    for P, _ in fac.factors:
        red = np.zeros((M, P.degree), dtype=np.int64)
        cur = Poly.one(p)
        T = Poly.monomial(1, p)
        for i in range(M):
            r = cur % P
            red[i, : len(r.coeffs)] = r.coeffs
            cur = cur * T
        is_unit &= ((C @ red) % p).any(axis=1)
    unit_codes = np.flatnonzero(is_unit).astype(np.int64)
    if unit_codes.size != phi:  # pragma: no cover - consistency guard
        raise AssertionError("unit census disagrees with the phi formula")
    Cu = C[unit_codes]
    del C

    def times(g: Poly) -> np.ndarray:
        perm = np.full(size, -1, dtype=np.int64)
        perm[unit_codes] = encode_rows((Cu @ _mult_matrix(g, m)) % p, p)
        return perm

    in_h = np.zeros(size, dtype=bool)
    in_h[1 % size] = True
    members = np.array([1], dtype=np.int64)
    cols: list[np.ndarray] = []
    rel_orders: list[int] = []
    relations: list[list[int]] = []
    while members.size < phi:
        g_code = int(unit_codes[np.flatnonzero(~in_h[unit_codes])[0]])
        perm = times(Poly.from_int(g_code, p))
        layers = [members]
        x = g_code
        while not in_h[x]:
            layers.append(perm[layers[-1]])
            x = int(perm[x])
        r = len(layers)
        row = [-int(c[x]) for c in cols] + [r]
        relations.append(row)
        rel_orders.append(r)
        for c in cols:
            for k in range(1, r):
                c[layers[k]] = c[layers[0]]
        new = np.zeros(size, dtype=np.int64)
        for k in range(1, r):
            new[layers[k]] = k
        cols.append(new)
        members = np.concatenate(layers)
        in_h[members] = True

    t = len(cols)
    if t == 0:
        orders: tuple[int, ...] = ()
        dlogs = np.zeros((phi, 0), dtype=np.int64)
    else:
        R = [row + [0] * (t - len(row)) for row in relations]
        _, D, V = smith_normal_form(R)
        diag = [D[i][i] for i in range(t)]
        X = np.stack([c[unit_codes] for c in cols], axis=1)
        Vn = np.array(V, dtype=object)
        Y = np.array((X.astype(object) @ Vn), dtype=object)
        keep = [i for i in range(t) if diag[i] != 1][::-1]
        orders = tuple(int(diag[i]) for i in keep)
        dlogs = np.array([[int(Y[u, i]) % diag[i] for i in keep] for u in range(phi)], dtype=np.int64).reshape(phi, len(keep))

    index_of_code = np.full(size, -1, dtype=np.int64)
    index_of_code[unit_codes] = np.arange(phi, dtype=np.int64)
    k = len(orders)
    strides = np.ones(k, dtype=np.int64)
    for i in range(k - 2, -1, -1):
        strides[i] = strides[i + 1] * orders[i + 1]
    flat = dlogs @ strides if k else np.zeros(phi, dtype=np.int64)
    code_of_flat = np.full(phi, -1, dtype=np.int64)
    code_of_flat[flat] = unit_codes
    if int(np.prod(orders, dtype=object)) != phi or (code_of_flat < 0).any():  # pragma: no cover
        raise AssertionError("invariant factors do not describe the unit group")
    gens = []
    for i in range(k):
        e = np.zeros(k, dtype=np.int64)
        e[i] = 1
        gens.append(Poly.from_int(int(code_of_flat[int(e @ strides)]), p))
    return Modulus(
        m=m,
        factorization=fac,
        phi=phi,
        orders=orders,
        generators=tuple(gens),
        unit_codes=unit_codes,
        dlogs=dlogs,
        _index_of_code=index_of_code,
        _code_of_flat=code_of_flat,
    )


def is_quadratic_residue(a, mod: Modulus) -> bool:
    """True iff a is a square in the unit group."""
    y = mod.dlog(a)
    return all(v % 2 == 0 for v, d in zip(y, mod.orders) if d % 2 == 0)


def cm(a, mod: Modulus) -> int:
    """Number of square roots of a, minus one.

    Squaring doubles exponent vectors, so a square has 2^(number of even
    invariant factors) roots.
    """
    if not is_quadratic_residue(a, mod):
        return -1
    return 2 ** sum(1 for d in mod.orders if d % 2 == 0) - 1


def cm_vector(mod: Modulus) -> np.ndarray:
    """C_m over all units, row-aligned with ``unit_codes``."""
    even = np.array([d % 2 == 0 for d in mod.orders], dtype=bool)
    if not even.any():
        return np.zeros(mod.phi, dtype=np.int64)
    square = (mod.dlogs[:, even] % 2 == 0).all(axis=1)
    return np.where(square, 2 ** int(even.sum()) - 1, -1).astype(np.int64)


def gcd_with_modulus(a: Poly, mod: Modulus) -> Poly:
    return poly_gcd(a, mod.m)
