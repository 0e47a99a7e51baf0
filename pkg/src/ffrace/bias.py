"""Race-level bias quantities: N_m, B_m, V_m, covariance and predictors.

Everything is a fold over the positive-imaginary sqrt(q) zeros.  With
W_chi = sum over those zeros of chi of |gamma/(gamma-1)|^2 one has
N_m = 2 sum_chi W_chi and B_m(a, b) = 2 Re sum_chi W_chi chi(a/b), so B_m for
all ratios at once is a single group DFT of W.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .characters import Character, all_characters, angle_numerators, exponent_matrix
from .errors import PreconditionError
from .ffpoly import Poly, factor, lambda0, list_irreducibles, poly_gcd
from .lfunctions import LData, all_l_data
from .unitgroup import Modulus, ResidueClass, cm

REAL_TOL = 1e-9
ANGLE_DENOM = 64
DUP_TOL = 1e-11


@dataclass
class SpectrumBundle:
    """The multiset S of sqrt(q) zeros of all non-principal characters.

    Attributes
    ----------
    char_index, gamma, weight : ndarray
        One entry per positive-imaginary zero, repeated by multiplicity;
        ``weight`` is |gamma/(gamma-1)| (not squared).
    W : ndarray
        Per-character sum of squared weights, in canonical character order.
    real_zeros : list of (character index, gamma, multiplicity)
        sqrt(q) zeros on the real axis; they are left out of N_m and B_m.
    """

    modulus: Modulus
    ldata: list[LData] = field(repr=False)
    char_index: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    weight: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    real_zeros: list[tuple[int, complex, int]]
    multiple_zeros: list[tuple[int, complex, int]]

    @property
    def li_violation(self) -> bool:
        """True when a real sqrt(q) zero is present."""
        return bool(self.real_zeros)

    @property
    def size(self) -> int:
        return int(self.gamma.size)

    def theta_over_pi(self) -> np.ndarray:
        return np.angle(self.gamma) / np.pi

    def li_diagnostics(self) -> dict:
        """Cheap necessary conditions for LI."""
        t = self.theta_over_pi()
        rational = [
            (int(c), float(x))
            for c, x in zip(self.char_index, t)
            if abs(Fraction(float(x)).limit_denominator(ANGLE_DENOM) - x) < REAL_TOL
        ]
        order = np.argsort(t)
        ts = t[order]
        dup = int(np.sum(np.diff(ts) < DUP_TOL)) if ts.size > 1 else 0
        return {
            "real_zeros": len(self.real_zeros),
            "multiple_zeros": len(self.multiple_zeros),
            "rational_angles": len(rational),
            "coincident_angles": dup,
            "li_clean": not (self.real_zeros or self.multiple_zeros or rational or dup),
        }


def build_spectrum(mod: Modulus) -> SpectrumBundle:
    cached = mod.__dict__.get("_spectrum")
    if cached is not None:
        return cached
    datas = all_l_data(mod)
    sq = math.sqrt(mod.q)
    idx, gam, real, multi = [], [], [], []
    W = np.zeros(mod.phi)
    for L in datas:
        ws = []
        for z in L.sqrt_q_zeros:
            if z.multiplicity > 1:
                multi.append((L.character.index, z.gamma, z.multiplicity))
            if abs(z.gamma.imag) <= REAL_TOL * sq:
                real.append((L.character.index, z.gamma, z.multiplicity))
                continue
            if z.gamma.imag > 0:
                for _ in range(z.multiplicity):
                    idx.append(L.character.index)
                    gam.append(z.gamma)
                    ws.append(abs(z.gamma / (z.gamma - 1)) ** 2)
        W[L.character.index] = math.fsum(ws)
    gamma = np.array(gam, dtype=complex)
    bundle = SpectrumBundle(
        modulus=mod,
        ldata=datas,
        char_index=np.array(idx, dtype=np.int64),
        gamma=gamma,
        weight=np.abs(gamma / (gamma - 1)) if gamma.size else np.zeros(0),
        W=W,
        real_zeros=real,
        multiple_zeros=multi,
    )
    mod.__dict__["_spectrum"] = bundle
    return bundle


def n_m(spec: SpectrumBundle) -> float:
    """2 * sum over positive-imaginary zeros of |gamma/(gamma-1)|^2."""
    return 2 * math.fsum(spec.W)


def b_m_table(spec: SpectrumBundle) -> np.ndarray:
    """B_m as a function of the ratio c = a/b, over the flat unit index."""
    cached = spec.__dict__.get("_b_table")
    if cached is not None:
        return cached
    mod = spec.modulus
    shape = mod.orders if mod.orders else (1,)
    table = 2 * (mod.phi * np.fft.ifftn(spec.W.reshape(shape))).real.reshape(-1)
    spec.__dict__["_b_table"] = table
    return table


def _ratio_dlog(mod: Modulus, a: ResidueClass, b: ResidueClass) -> np.ndarray:
    return np.array([x - y for x, y in zip(a.exps, b.exps)], dtype=np.int64)


def b_m(spec: SpectrumBundle, a, b) -> float:
    """sum over positive zeros of (chi(a/b) + chi(b/a)) |gamma/(gamma-1)|^2."""
    mod = spec.modulus
    ra, rb = mod.residue(a), mod.residue(b)
    if ra.rep == rb.rep:
        raise PreconditionError("B_m needs two distinct classes")
    y = _ratio_dlog(mod, ra, rb)
    k = angle_numerators(mod, exponent_matrix(mod), y[None, :])[:, 0]
    return float(2 * math.fsum(spec.W * np.cos(2 * np.pi * k / mod.exponent)))


def b_m_direct(spec: SpectrumBundle, a, b) -> float:
    """Same as :func:`b_m` but summed zero by zero (independent check)."""
    mod = spec.modulus
    ra, rb = mod.residue(a), mod.residue(b)
    chars = all_characters(mod)
    total = []
    for c, g in zip(spec.char_index, spec.gamma):
        chi = chars[int(c)]
        t1, t2 = chi.angle(ra) - chi.angle(rb), chi.angle(rb) - chi.angle(ra)
        val = np.exp(2j * np.pi * float(t1)) + np.exp(2j * np.pi * float(t2))
        total.append((val * abs(g / (g - 1)) ** 2).real)
    return math.fsum(total)


def pair_sum_identity(spec: SpectrumBundle) -> tuple[float, float]:
    """(sum over ordered pairs a != b of B_m(a, b), -phi * N_m)."""
    mod = spec.modulus
    table = b_m_table(spec)
    one = int(mod.flat_of_dlogs(np.zeros(mod.rank, dtype=np.int64)))
    # each ratio c != 1 arises from exactly phi ordered pairs
    lhs = mod.phi * (math.fsum(table) - table[one])
    return lhs, -mod.phi * n_m(spec)


def xprime_values(q: int) -> tuple[float, float]:
    return math.sqrt(q) / (q - 1), q / (q - 1)


def xprime_var(q: int) -> float:
    lo, hi = xprime_values(q)
    return 0.25 * (hi - lo) ** 2


@dataclass
class RaceReport:
    """Bias data for one race (a_1, ..., a_r)."""

    classes: list[ResidueClass]
    C: np.ndarray
    N_m: float
    B: np.ndarray
    V: np.ndarray
    covariance: np.ndarray
    q: int
    phi: int
    M: int
    C_one: int = 0
    densities: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "classes": [str(c) for c in self.classes],
            "C": [int(c) for c in self.C],
            "N_m": self.N_m,
            "B": self.B.tolist(),
            "V": self.V.tolist(),
            "covariance": self.covariance.tolist(),
            "q": self.q,
            "phi": self.phi,
            "M": self.M,
            "C_one": self.C_one,
            "densities": self.densities,
        }


def covariance_matrix(spec: SpectrumBundle, classes: Sequence) -> np.ndarray:
    """Covariance of (X_{m;a_1}, ..., X_{m;a_r}) from N_m, B_m and C_m."""
    return race_report(spec, classes).covariance


def race_report(spec: SpectrumBundle, classes: Sequence) -> RaceReport:
    mod = spec.modulus
    cls = [mod.residue(a) for a in classes]
    if len({c.rep for c in cls}) != len(cls):
        raise PreconditionError("race classes must be pairwise distinct")
    r = len(cls)
    C = np.array([cm(c, mod) for c in cls], dtype=np.int64)
    N = n_m(spec)
    table = b_m_table(spec)
    B = np.full((r, r), N)
    for j, k in itertools.combinations(range(r), 2):
        f = int(mod.flat_of_dlogs(_ratio_dlog(mod, cls[j], cls[k])))
        B[j, k] = B[k, j] = table[f]
    V = 2 * (N - B)
    cov = B + xprime_var(mod.q) * np.outer(C, C)
    return RaceReport(cls, C, N, B, V, cov, mod.q, mod.phi, mod.M, cm(1, mod))


# main-term predictors

def lambda0_ratio(a: Poly, b: Poly) -> Fraction:
    """Lambda_0(Pmax/Pmin) in log-q units; zero unless the ratio is a monic prime power."""
    hi, lo = _pmax_pmin(a, b)
    if lo.is_zero:
        return Fraction(0)
    qt, rem = divmod(hi, lo)
    if not rem.is_zero or not qt.is_monic or qt.degree < 1:
        return Fraction(0)
    return lambda0(qt)


def _pmax_pmin(a: Poly, b: Poly) -> tuple[Poly, Poly]:
    return (a, b) if a.degree >= b.degree else (b, a)


def b_m_predictor(mod: Modulus, a: Poly, b: Poly) -> float:
    """Main term of B_m(a, b) for deg a, deg b < M."""
    a = mod.reduce(a) if not isinstance(a, Poly) else a
    b = mod.reduce(b) if not isinstance(b, Poly) else b
    if a.degree >= mod.M or b.degree >= mod.M:
        raise PreconditionError("predictor needs deg a, deg b < M")
    q, phi = mod.q, mod.phi
    if a.degree == b.degree:
        l = 1 if (a + b).is_zero else 0
        return -(q * q + q) / (2 * (q - 1) ** 2) * phi * l + 0.0
    hi, lo = _pmax_pmin(a, b)
    qt, rem = divmod(hi, lo)
    lam = lambda0(qt) if rem.is_zero and qt.is_monic else Fraction(0)
    return -q / (q - 1) * phi * float(lam) + 0.0


@dataclass
class FirstMoment:
    mean_abs: float
    lower: float
    upper: float
    identity_lhs: float
    identity_rhs: float

    @property
    def identity_residual(self) -> float:
        return abs(self.identity_lhs - self.identity_rhs) / max(1.0, abs(self.identity_rhs))


def first_moment_bm(mod: Modulus) -> FirstMoment:
    """Average of |B_m(a, b)| over all ordered pairs of distinct units.

    Every ratio c != 1 is hit by exactly phi pairs, so the average over pairs
    equals the average over ratios and no sampling is needed.
    """
    spec = build_spectrum(mod)
    table = b_m_table(spec)
    one = int(mod.flat_of_dlogs(np.zeros(mod.rank, dtype=np.int64)))
    others = np.delete(table, one)
    q, M = mod.q, mod.M
    lhs, rhs = pair_sum_identity(spec)
    return FirstMoment(
        mean_abs=float(np.mean(np.abs(others))) if others.size else 0.0,
        lower=q / (q - 1) * M,
        upper=17 * q / (q - 1) * M,
        identity_lhs=lhs,
        identity_rhs=rhs,
    )


# biased tuple constructions

@dataclass
class Construction:
    kind: str
    tuple_a: tuple[Poly, ...]
    tuple_b: tuple[Poly, ...] | None
    P_prime: Poly
    P0: Poly | None
    P1: Poly
    P2: Poly

    def permuted(self) -> tuple[Poly, ...]:
        """Swap positions 1 and r-1 (one-based)."""
        t = list(self.tuple_a)
        r = len(t)
        t[0], t[r - 2] = t[r - 2], t[0]
        return tuple(t)


def _primes_in_order(p: int, max_degree: int):
    for d in range(1, max_degree + 1):
        yield from list_irreducibles(d, p)


def _is_qnr_mod(P: Poly, Q: Poly) -> bool:
    """Euler's criterion for P modulo the prime Q."""
    e = (Q.norm() - 1) // 2
    return P.powmod(e, Q) == Poly.constant(Q.p - 1, Q.p)


def auxiliary_primes(mod: Modulus) -> tuple[Poly, Poly | None, Poly, Poly]:
    """(P', P0, P1, P2) for the constructions.

    P' is a largest-degree prime of m, P0 the least-degree prime not dividing m
    that is a non-residue mod P', P1 < P2 the first primes not dividing m,
    different from P0, with |P| <= 2qM.
    """
    p, q, M = mod.p, mod.q, mod.M
    primes_m = [P for P, _ in mod.factorization.factors]
    Pp = max(primes_m, key=lambda P: P.degree)
    bound0 = int(math.floor(2 + 2 * math.log(1 + Pp.degree, q) + 1e-12))
    P0 = None
    for P in _primes_in_order(p, bound0):
        if P in primes_m:
            continue
        if _is_qnr_mod(P, Pp):
            P0 = P
            break
    max_deg = int(math.floor(math.log(2 * q * M, q) + 1e-12))
    small = [P for P in _primes_in_order(p, max(max_deg, 0)) if P not in primes_m and P != P0]
    if len(small) < 2:
        raise PreconditionError(
            f"construction infeasible: need two primes P1, P2 not dividing m with |P| <= 2qM = {2 * q * M}, found {len(small)}"
        )
    return Pp, P0, small[0], small[1]


def construct_biased_tuple(mod: Modulus, r: int, kind: str = "quadratic", kappa: Sequence[float] | None = None) -> Construction:
    """Residue tuples from the explicit biased-race constructions.

    ``quadratic``: (1, (P1P2)^4, ..., (P1P2)^(2(r-1)), P1^2).
    ``general``:   (1, (P1P2)^4, ..., (P1P2)^(2(r-1)), -1).
    ``martin_counterexample``: a pair of tuples (a, b) with
    sum kappa_j C(a_j) > sum kappa_j C(b_j) built for the given ``kappa``.
    """
    if r < 2:
        raise PreconditionError("r must be at least 2")
    Pp, P0, P1, P2 = auxiliary_primes(mod)
    p = mod.p
    one = Poly.one(p)
    Q = P1 * P2
    if kind in ("quadratic", "general"):
        mid = [Q ** (2 * j) for j in range(2, r)]
        last = P1**2 if kind == "quadratic" else Poly.constant(p - 1, p)
        a = (one, *mid, last)
        b = None
    elif kind == "martin_counterexample":
        if P0 is None:
            raise PreconditionError(f"construction infeasible: no prime P0 of degree <= 2 + 2 log_q(1 + deg P') that is a non-residue mod P' = {Pp}")
        if r < 3:
            raise PreconditionError("the Martin-type construction needs r >= 3")
        kappa = list(kappa) if kappa is not None else [0.0] * (r - 1) + [1.0]
        if len(kappa) != r or not any(kappa):
            raise PreconditionError("kappa must be a nonzero vector of length r")
        a, b = _martin(r, kappa, one, P0, P1, Q)
    else:
        raise PreconditionError(f"unknown construction kind {kind!r}")
    cons = Construction(kind, tuple(a), None if b is None else tuple(b), Pp, P0, P1, P2)
    _validate(mod, cons.tuple_a)
    if cons.tuple_b is not None:
        _validate(mod, cons.tuple_b)
    return cons


def _martin(r, kappa, one, P0, P1, Q):
    if kappa[r - 1] != 0 or kappa[0] != 0:
        flip = kappa[r - 1] == 0
        s = kappa[0] if flip else kappa[r - 1]
        if s > 0:
            a = [one] + [P0 * Q ** (2 * j) for j in range(2, r)] + [Q**2]
            b = a[:-1] + [P0]
        else:
            a = [one] + [P0 * Q ** (2 * j) for j in range(2, r + 1)]
            b = a[:-1] + [P1**2]
        if flip:
            a[0], a[-1] = a[-1], a[0]
            b[0], b[-1] = b[-1], b[0]
        return a, b
    l = next(j for j in range(1, r - 1) if kappa[j] != 0) + 1  # one-based
    if kappa[l - 1] > 0:
        a = [one] + [Q**2 if j == l else P0 * Q ** (4 * j) for j in range(2, r + 1)]
        b = list(a)
        b[r - 1] = P0
        b[l - 1] = P0 * Q ** (4 * l)
    else:
        a = [one] + [P0 * Q ** (4 * j) for j in range(2, r)] + [Q**4]
        b = list(a)
        b[l - 1] = Q**4
        b[r - 1] = P1**2
    return a, b


def _validate(mod: Modulus, tup: Sequence[Poly]) -> None:
    reps = []
    for a in tup:
        if poly_gcd(a, mod.m).degree > 0:
            raise PreconditionError(f"construction infeasible: {a} is not coprime to m")
        reps.append(mod.reduce(a))
    if len(set(reps)) != len(reps):
        raise PreconditionError("construction infeasible: classes are not distinct modulo m at this size")


# extremely biased races

def _is_prime_power(f: Poly) -> bool:
    if f.degree < 1 or not f.is_monic:
        return False
    fac = factor(f)
    return len(fac.factors) == 1


def extremely_biased_classifier(classes: Sequence[Poly], bound: int) -> tuple[str, tuple[int, int] | None]:
    """Check the two extreme-bias criteria literally over all ordered pairs.

    Returns ("biased_by_negation" | "biased_by_prime_power_ratio" |
    "not_extreme", witness pair of zero-based indices or None).
    """
    if any(a.degree > bound for a in classes):
        raise PreconditionError(f"all classes must have degree <= {bound}")
    r = len(classes)
    pairs = [(j, k) for j in range(r) for k in range(r) if j != k]
    for j, k in pairs:
        if (classes[j] + classes[k]).is_zero:
            return "biased_by_negation", (j, k)
    for j, k in pairs:
        qt, rem = divmod(classes[j], classes[k])
        if rem.is_zero and _is_prime_power(qt):
            return "biased_by_prime_power_ratio", (j, k)
    return "not_extreme", None


def lambda0_triple_test(a1: Poly, a2: Poly, a3: Poly) -> tuple[tuple[int, int, int], Fraction] | None:
    """A permutation sigma with L(X_s1) + L(X_s2) - 2 L(X_s3) != 0, L = Lambda_0.

    X_1, X_2, X_3 are the ratios Pmax/Pmin of the pairs (a1,a2), (a2,a3),
    (a1,a3).  Values are in log-q units.
    """
    if len({a1.degree, a2.degree, a3.degree}) != 3:
        raise PreconditionError("the three classes must have distinct degrees")
    X = [lambda0_ratio(a1, a2), lambda0_ratio(a2, a3), lambda0_ratio(a1, a3)]
    if not any(X):
        return None
    for s in itertools.permutations(range(3)):
        v = X[s[0]] + X[s[1]] - 2 * X[s[2]]
        if v != 0:
            return tuple(i + 1 for i in s), v
    return None
