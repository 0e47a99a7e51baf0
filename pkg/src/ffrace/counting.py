"""Exact counts of primes in residue classes.

Two engines:

``sieve``
    Enumerate the monic irreducibles of degree N and reduce them mod m.
``spectral``
    Work in the integral group ring of the unit group.  With z_n the class
    histogram of monics of degree n coprime to m, the prime-power sums
    Theta_N(a) = sum_{deg f = N, f = a mod m} Lambda(f)/log q satisfy
    Theta_N = N z_N - sum_{k<N} Theta_k * z_{N-k}  (Newton's identity for the
    Euler product).  Pairing Theta_N with a character gives psi_N(chi), so this
    is character inversion of the psi sums carried out in exact integers.
    For n >= M every class is hit q^(n-M) times, which keeps the recursion
    cheap.  Prime counts follow by peeling off proper prime powers.

Arrays over the unit group are indexed by the mixed-radix dlog index
(``Modulus.flat_of_unit``), except where noted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapExceededError, PreconditionError
from .ffpoly import SIEVE_CAP, _irreducible_codes, coeff_matrix, count_irreducibles
from .unitgroup import Modulus


def _flat_residues(mod: Modulus, codes: np.ndarray, n: int) -> np.ndarray:
    """Mixed-radix unit index of monic polynomials of degree n (-1 if not a unit)."""
    if n < mod.M:
        red = codes
    else:
        C = coeff_matrix(codes, mod.p, n + 1)
        red = mod.reduce_coeff_rows(C)
    idx = mod.index_of_codes(red)
    out = np.full(idx.shape, -1, dtype=np.int64)
    ok = idx >= 0
    out[ok] = mod.flat_of_unit[idx[ok]]
    return out


def prime_counts_sieve(mod: Modulus, N: int) -> np.ndarray:
    """pi_q(a, m, N) for every unit a (flat index), by enumeration."""
    if mod.p**N > SIEVE_CAP:
        raise CapExceededError(f"sieve for degree {N} over F_{mod.p} exceeds the cap")
    flat = _flat_residues(mod, _irreducible_codes(N, mod.p), N)
    return np.bincount(flat[flat >= 0], minlength=mod.phi).astype(object)


def _roll(mod: Modulus, y: np.ndarray, g: int) -> np.ndarray:
    """Translate a group-ring element by the unit with flat index g."""
    shape = mod.orders
    shifts = []
    for s in mod.strides:
        shifts.append(g // int(s))
        g %= int(s)
    return np.roll(y.reshape(shape), shifts, axis=tuple(range(len(shape)))).reshape(-1)


def group_convolve(mod: Modulus, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Product in Z[G] of elements given over the flat index."""
    if mod.rank == 0:
        return x * y
    out = np.zeros(mod.phi, dtype=object)
    for g in np.flatnonzero(x != 0):
        out = out + x[g] * _roll(mod, y, int(g))
    return out


def _power_map(mod: Modulus, e: int) -> np.ndarray:
    """flat index of b^e for every flat index b."""
    if mod.rank == 0:
        return np.zeros(1, dtype=np.int64)
    flat = np.arange(mod.phi, dtype=np.int64)
    digits = (flat[:, None] // mod.strides[None, :]) % np.array(mod.orders)[None, :]
    return mod.flat_of_dlogs(digits * e)


@dataclass
class SpectralCounter:
    """Incremental exact prime counts via the group-ring recursion."""

    mod: Modulus

    def __post_init__(self) -> None:
        mod = self.mod
        self.z_low: list[np.ndarray] = []
        for n in range(mod.M):
            codes = np.arange(mod.p**n, 2 * mod.p**n, dtype=np.int64)
            flat = _flat_residues(mod, codes, n)
            self.z_low.append(np.bincount(flat[flat >= 0], minlength=mod.phi).astype(object))
        self.theta: list[np.ndarray | None] = [None]
        self.theta_total: list[int] = [0]
        self.primes: list[np.ndarray | None] = [None]
        self._tail = 0  # sum_{k <= N-M} q^(N-M-k) |Theta_k| for the current N
        self._pow_cache: dict[int, np.ndarray] = {}

    def _z(self, n: int) -> np.ndarray:
        if n < self.mod.M:
            return self.z_low[n]
        return np.full(self.mod.phi, self.mod.q ** (n - self.mod.M), dtype=object)

    def _step(self) -> None:
        mod = self.mod
        N = len(self.theta)
        M = mod.M
        th = N * self._z(N)
        # contributions with N - k < M need genuine convolutions
        for k in range(max(1, N - M + 1), N):
            th = th - group_convolve(mod, self.theta[k], self.z_low[N - k])
        # the rest is a multiple of the all-ones element
        if N - M >= 1:
            self._tail = self._tail * mod.q + self.theta_total[N - M]
            th = th - self._tail
        self.theta.append(th)
        self.theta_total.append(int(sum(th)))
        # peel off proper prime powers
        acc = th.copy()
        for d in range(1, N):
            if N % d:
                continue
            e = N // d
            pm = self._pow_cache.get(e)
            if pm is None:
                pm = self._pow_cache[e] = _power_map(mod, e)
            contrib = np.zeros(mod.phi, dtype=object)
            np.add.at(contrib, pm, self.primes[d])
            acc = acc - d * contrib
        counts = np.array([v // N for v in acc], dtype=object)
        if any(v % N for v in acc):  # pragma: no cover - would mean an arithmetic bug
            raise AssertionError(f"non-integral prime count at degree {N}")
        self.primes.append(counts)

    def counts(self, N: int) -> np.ndarray:
        while len(self.primes) <= N:
            self._step()
        return self.primes[N]

    def theta_n(self, N: int) -> np.ndarray:
        self.counts(N)
        return self.theta[N]


def spectral_counter(mod: Modulus) -> SpectralCounter:
    c = mod.__dict__.get("_spectral_counter")
    if c is None:
        c = mod.__dict__["_spectral_counter"] = SpectralCounter(mod)
    return c


def prime_counts_spectral(mod: Modulus, N: int) -> np.ndarray:
    """pi_q(a, m, N) for every unit a (flat index), exact."""
    if N < 1:
        raise PreconditionError("N must be positive")
    return spectral_counter(mod).counts(N)


def count_primes_in_class(mod: Modulus, a, N: int, engine: str = "spectral") -> int:
    """pi_q(a, m, N), the number of monic primes of degree N congruent to a."""
    r = mod.residue(a)
    flat = int(mod.flat_of_dlogs(np.array(r.exps)))
    if engine == "sieve":
        return int(prime_counts_sieve(mod, N)[flat])
    if engine == "spectral":
        return int(prime_counts_spectral(mod, N)[flat])
    raise PreconditionError(f"unknown engine {engine!r}")


def primes_dividing(mod: Modulus, N: int) -> int:
    return sum(1 for P, _ in mod.factorization.factors if P.degree == N)


def flat_index(mod: Modulus, a) -> int:
    return int(mod.flat_of_dlogs(np.array(mod.residue(a).exps)))


@dataclass
class Trajectory:
    """Normalized race discrepancies E_{m;a}(X) for X = 1..X_max."""

    classes: list
    X: np.ndarray
    E: np.ndarray  # shape (X_max, r)
    partial_sums: list[list[int]]  # exact sum_{N<=X} (phi*pi(a,N) - pi(N))

    def ordered(self) -> np.ndarray:
        """True where E_1 > E_2 > ... > E_r strictly."""
        if self.E.shape[1] < 2:
            return np.ones(len(self.X), dtype=bool)
        return (np.diff(self.E, axis=1) < 0).all(axis=1)

    def ranks(self) -> np.ndarray:
        """Rank of each class at each X (1 = largest)."""
        order = np.argsort(-self.E, axis=1, kind="stable")
        ranks = np.empty_like(order)
        rows = np.arange(order.shape[0])[:, None]
        ranks[rows, order] = np.arange(1, order.shape[1] + 1)[None, :]
        return ranks


def race_trajectory(mod: Modulus, classes: Sequence, X_max: int) -> Trajectory:
    """E_{m;a}(X) = (X / q^(X/2)) sum_{N<=X} (phi(m) pi_q(a,m,N) - pi_q(N))."""
    import math

    if X_max < 1:
        raise PreconditionError("X_max must be positive")
    flats = [flat_index(mod, a) for a in classes]
    counter = spectral_counter(mod)
    sums = [0] * len(flats)
    partial: list[list[int]] = []
    E = np.zeros((X_max, len(flats)))
    q = mod.q
    for X in range(1, X_max + 1):
        c = counter.counts(X)
        total = count_irreducibles(X, q)
        for j, f in enumerate(flats):
            sums[j] += mod.phi * int(c[f]) - total
        partial.append(list(sums))
        half, odd = divmod(X, 2)
        for j, s in enumerate(sums):
            v = X * s / q**half
            E[X - 1, j] = v / math.sqrt(q) if odd else v
    return Trajectory(list(classes), np.arange(1, X_max + 1), E, partial)
