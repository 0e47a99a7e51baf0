"""Dirichlet L-polynomials, inverse zeros, psi sums and I(chi).

All coefficients c_n = sum_{deg f = n, f monic} chi(f) come out of one group
DFT per degree: the dlogs of the monics of degree n < M are histogrammed over
the unit group and ``phi * ifftn`` of that histogram is c_n for every
character at once.

Inverse zeros are split by origin.  The factors (1 - u) for even characters
and (1 - chi*(P) u^deg P) for primes dividing m but not the conductor give
zeros on the unit circle exactly; the remaining core polynomial, whose roots
lie on |gamma| = sqrt(q), is solved with Aberth-Ehrlich iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .characters import Character, all_characters, char_angle
from .errors import CapExceededError, NumericalError, PreconditionError
from .ffpoly import Poly
from .unitgroup import Modulus

#: Largest modulus degree accepted per characteristic.
DEGREE_CAP = {3: 12, 5: 8, 7: 7}
COEFF_TOL = 1e-7
CLASS_TOL = 1e-6
CLUSTER_TOL = 1e-6
MAX_SWEEPS = 500


@dataclass(frozen=True)
class InverseZero:
    """An inverse zero gamma of L(u, chi) = prod (1 - gamma u)."""

    gamma: complex
    kind: str  # "sqrt_q", "unit" or "trivial"
    multiplicity: int = 1

    @property
    def theta(self) -> float:
        return math.atan2(self.gamma.imag, self.gamma.real)

    def weight(self) -> float:
        """|gamma / (gamma - 1)|^2."""
        g = self.gamma
        return abs(g / (g - 1)) ** 2


@dataclass
class LData:
    """L-polynomial of one character together with its inverse zeros.

    ``coeffs`` holds c_0..c_deg of L(u, chi); ``primitive_coeffs`` those of
    L(u, chi*).  ``imprimitive`` lists (P, angle of chi*(P)) for the primes of
    m that do not divide the conductor.
    """

    character: Character
    coeffs: np.ndarray
    primitive_coeffs: np.ndarray
    imprimitive: list[tuple[Poly, Fraction]]
    trivial_factor: bool
    zeros: list[InverseZero] = field(default_factory=list)
    converged: bool = True

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def sqrt_q_zeros(self) -> list[InverseZero]:
        return [z for z in self.zeros if z.kind == "sqrt_q"]

    def all_gammas(self) -> np.ndarray:
        """Zeros repeated by multiplicity."""
        return np.array([z.gamma for z in self.zeros for _ in range(z.multiplicity)], dtype=complex)

    def __call__(self, u: complex) -> complex:
        return complex(np.polyval(self.coeffs[::-1], u))


# coefficients

def _check_caps(mod: Modulus) -> None:
    cap = DEGREE_CAP.get(mod.p, max(2, int(12 * math.log(3) / math.log(mod.p))))
    if mod.M > cap:
        raise CapExceededError(f"modulus degree {mod.M} exceeds cap {cap} for q={mod.p}")


def coefficient_table(mod: Modulus) -> np.ndarray:
    """Complex array (phi, M): entry [chi, n] is c_n(chi), characters in canonical order."""
    cached = mod.__dict__.get("_coeff_table")
    if cached is not None:
        return cached
    _check_caps(mod)
    p, M, phi = mod.p, mod.M, mod.phi
    shape = mod.orders if mod.orders else (1,)
    out = np.zeros((phi, M), dtype=complex)
    for n in range(M):
        idx = mod.index_of_codes(np.arange(p**n, 2 * p**n, dtype=np.int64))
        idx = idx[idx >= 0]
        h = np.bincount(mod.flat_of_unit[idx], minlength=phi).astype(float)
        out[:, n] = (phi * np.fft.ifftn(h.reshape(shape))).reshape(-1)
    mod.__dict__["_coeff_table"] = out
    return out


def _chi_star_angle(chi: Character, P: Poly) -> Fraction:
    """Angle of chi*(P) for a prime P of m not dividing the conductor."""
    mod = chi.modulus
    f = chi.conductor
    h = 0
    while True:
        x = (P + f * Poly.from_int(h, mod.p)) % mod.m
        t = char_angle(chi, x)
        if t is not None:
            return t
        h += 1


def _missing_primes(chi: Character) -> list[Poly]:
    """Primes of m that do not divide the conductor."""
    return [P for P, _ in chi.modulus.factorization.factors if not (chi.conductor % P).is_zero]


def _expected_degree(chi: Character, missing: list[Poly]) -> int:
    if chi.is_principal:
        return chi.modulus.M - 1
    return chi.conductor_degree - 1 + sum(P.degree for P in missing)


def _series_divide(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """First n coefficients of a / b as power series (b[0] = 1)."""
    out = np.zeros(n, dtype=complex)
    a = np.concatenate([a, np.zeros(max(0, n - len(a)), dtype=complex)])
    for k in range(n):
        s = a[k]
        for j in range(1, min(k, len(b) - 1) + 1):
            s -= b[j] * out[k - j]
        out[k] = s
    return out


def _unit_factor(P: Poly, t: Fraction) -> np.ndarray:
    c = np.zeros(P.degree + 1, dtype=complex)
    c[0] = 1
    c[-1] = -np.exp(2j * np.pi * float(t))
    return c


# root finding

def _horner(C: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of monic-leading polys C (rows, high degree first)."""
    p = np.ones_like(z)
    dp = np.zeros_like(z)
    for k in range(1, C.shape[1]):
        dp = dp * z + p
        p = p * z + C[:, k : k + 1]
    return p, dp


def aberth(C: np.ndarray, radius: float, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Roots of a batch of monic polynomials.

    ``C`` has shape (B, d+1) with C[:, 0] = 1 and descending powers.  Returns
    (roots (B, d), converged flags (B,)).
    """
    B, d1 = C.shape
    d = d1 - 1
    k = np.arange(d)
    z = np.tile(radius * np.exp(1j * (2 * np.pi * k / d + 0.4)), (B, 1)).astype(complex)
    active = np.ones(B, dtype=bool)
    scale_c = np.abs(C)
    for _ in range(max_sweeps):
        if not active.any():
            break
        za = z[active]
        Ca = C[active]
        p, dp = _horner(Ca, za)
        ratio = np.where(dp != 0, p / np.where(dp != 0, dp, 1), 0)
        diff = za[:, :, None] - za[:, None, :]
        np.einsum("bii->bi", diff)[...] = 1
        inv = 1 / diff
        np.einsum("bii->bi", inv)[...] = 0
        S = inv.sum(axis=2)
        w = ratio / (1 - ratio * S)
        za = za - w
        z[active] = za
        absz = np.abs(za)
        bound = np.zeros_like(absz)
        for j in range(d1):
            bound = bound * absz + scale_c[active][:, j : j + 1]
        p_new, _ = _horner(Ca, za)
        small_step = np.abs(w) <= 1e-13 * np.maximum(1, absz)
        small_res = np.abs(p_new) <= 8 * np.finfo(float).eps * bound
        done = (small_step | small_res).all(axis=1)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return z, ~active


def durand_kerner(c: np.ndarray, radius: float, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, bool]:
    """Weierstrass iteration for one monic polynomial (descending powers)."""
    d = len(c) - 1
    z = radius * np.exp(1j * (2 * np.pi * np.arange(d) / d + 0.4))
    for _ in range(max_sweeps):
        num = np.polyval(c, z)
        den = np.array([np.prod(z[i] - np.delete(z, i)) for i in range(d)])
        w = num / den
        z = z - w
        if (np.abs(w) <= 1e-13 * np.maximum(1, np.abs(z))).all():
            return z, True
    return z, False


def _cluster(roots: Sequence[complex], tol: float) -> list[tuple[complex, int]]:
    r = np.asarray(roots, dtype=complex)
    if r.size == 0:
        return []
    dist = np.abs(r[:, None] - r[None, :])
    close = dist <= tol * np.maximum(1.0, np.abs(r))[:, None]
    if close.sum() == r.size:
        return [(complex(x), 1) for x in r]
    out = []
    left = np.ones(r.size, dtype=bool)
    for i in range(r.size):
        if not left[i]:
            continue
        group = close[i] & left
        left &= ~group
        out.append((complex(r[group].mean()), int(group.sum())))
    return out


def _refine_multiple(c: np.ndarray, g: complex, k: int) -> complex:
    """Newton on the (k-1)-th derivative, where a k-fold root is simple."""
    d = np.polyder(c, k - 1)
    dd = np.polyder(d)
    for _ in range(4):
        den = np.polyval(dd, g)
        if den == 0:
            break
        g = g - np.polyval(d, g) / den
    return complex(g)


def _classify_core(root: complex, q: int) -> str:
    a = abs(root)
    if abs(a - math.sqrt(q)) <= CLASS_TOL * math.sqrt(q):
        return "sqrt_q"
    if abs(a - 1) <= CLASS_TOL:
        return "unit"
    raise NumericalError(f"inverse zero {root} has modulus {a}, neither 1 nor sqrt(q)")


# public API

def _build_all(mod: Modulus) -> list[LData]:
    table = coefficient_table(mod)
    chars = all_characters(mod)
    q = mod.q
    datas: list[LData] = []
    missing_of: dict[Poly, list[Poly]] = {}
    for chi in chars:
        full = table[chi.index]
        missing = missing_of.get(chi.conductor)
        if missing is None:
            missing = missing_of[chi.conductor] = _missing_primes(chi)
        deg = _expected_degree(chi, missing)
        tail = full[deg + 1 :]
        scale = max(1.0, float(np.abs(full).max()))
        if tail.size and np.abs(tail).max() > COEFF_TOL * scale:
            raise NumericalError(f"character {chi.index}: coefficients beyond degree {deg} do not vanish")
        coeffs = full[: deg + 1].copy()
        if chi.is_principal:
            datas.append(LData(chi, coeffs, coeffs.copy(), [], False))
            continue
        imprim = [(P, _chi_star_angle(chi, P)) for P in missing]
        denom = np.array([1], dtype=complex)
        for P, t in imprim:
            denom = np.convolve(denom, _unit_factor(P, t))
        prim = _series_divide(coeffs, denom, chi.conductor_degree)
        datas.append(LData(chi, coeffs, prim, imprim, chi.even))
    _attach_zeros(datas, q)
    return datas


def _attach_zeros(datas: list[LData], q: int) -> None:
    cores: dict[int, list[tuple[int, np.ndarray]]] = {}
    for i, L in enumerate(datas):
        if L.character.is_principal:
            continue
        core = L.primitive_coeffs
        if L.trivial_factor:
            core = _series_divide(core, np.array([1, -1], dtype=complex), len(core) - 1)
        if len(core) > 1:
            cores.setdefault(len(core) - 1, []).append((i, core))
    roots_of: dict[int, np.ndarray] = {}
    for d, items in cores.items():
        # ascending coefficients of L are the descending ones of the reversed
        # polynomial, whose roots are the inverse zeros; c_0 = 1 makes it monic
        C = np.array([c for _, c in items])
        z, ok = aberth(C, math.sqrt(q))
        for row, (i, c) in enumerate(items):
            r = z[row]
            good = ok[row]
            if not good:
                r, good = durand_kerner(c, math.sqrt(q))
                datas[i].converged = good
            if not good:
                raise NumericalError(f"root iteration failed for character {datas[i].character.index}: coeffs {c.tolist()}")
            # Newton polish against the core polynomial
            for _ in range(2):
                pv = np.polyval(c, r)
                dv = np.polyval(np.polyder(c), r)
                step = np.where(np.abs(dv) > 1e-8, pv / np.where(dv == 0, 1, dv), 0)
                r = r - step
            roots_of[i] = r
    for i, L in enumerate(datas):
        if L.character.is_principal:
            continue
        zeros: list[InverseZero] = []
        if L.trivial_factor:
            zeros.append(InverseZero(1 + 0j, "trivial", 1))
        units = []
        for P, t in L.imprimitive:
            d = P.degree
            for j in range(d):
                units.append(np.exp(2j * np.pi * (float(t) + j) / d))
        for g, mult in _cluster(units, CLUSTER_TOL):
            zeros.append(InverseZero(g, "unit", mult))
        if i in roots_of:
            core = L.primitive_coeffs
            for g, mult in _cluster(list(roots_of[i]), CLUSTER_TOL):
                if mult > 1:
                    g = _refine_multiple(core, g, mult)
                zeros.append(InverseZero(g, _classify_core(g, q), mult))
        L.zeros = zeros
        _check_residual(L)


def _check_residual(L: LData) -> None:
    if not L.zeros:
        return
    c = L.coeffs
    u = 1 / np.array([z.gamma for z in L.zeros])
    mult = np.array([z.multiplicity for z in L.zeros])
    val = np.abs(np.polyval(c[::-1], u))
    scale = np.polyval(np.abs(c[::-1]), np.abs(u))
    tol = np.where(mult == 1, 1e-9, 1e-6) * scale
    bad = np.flatnonzero(val > tol)
    if bad.size:
        i = int(bad[0])
        raise NumericalError(
            f"character {L.character.index}: residual {val[i]:.3e} at inverse zero {L.zeros[i].gamma}"
        )


def all_l_data(mod: Modulus) -> list[LData]:
    """LData for every character (principal included, without zeros)."""
    cached = mod.__dict__.get("_l_data")
    if cached is None:
        cached = _build_all(mod)
        mod.__dict__["_l_data"] = cached
    return cached


def l_polynomial(chi: Character) -> LData:
    return all_l_data(chi.modulus)[chi.index]


def inverse_zeros(L: LData) -> list[InverseZero]:
    return L.zeros


def raw_roots(L: LData) -> np.ndarray:
    """Inverse zeros of the full L-polynomial straight from Aberth (no factor splitting)."""
    c = L.coeffs
    if len(c) <= 1:
        return np.zeros(0, dtype=complex)
    z, ok = aberth(c[None, :], math.sqrt(L.character.modulus.q))
    if not ok[0]:
        r, good = durand_kerner(c, math.sqrt(L.character.modulus.q))
        if not good:
            raise NumericalError("root iteration failed")
        return r
    return z[0]


def i_chi(L: LData) -> float:
    """Half the sum of |gamma/(gamma-1)|^2 over the sqrt(q) zeros."""
    return 0.5 * sum(z.multiplicity * z.weight() for z in L.sqrt_q_zeros)


def _log_deriv(c: np.ndarray, q: int) -> complex:
    u = 1 / q
    val = np.polyval(c[::-1], u)
    der = np.polyval(np.polyder(c[::-1]), u) if len(c) > 1 else 0
    return complex(-(math.log(q) / q) * der / val)


def log_deriv_at_one(L: LData) -> complex:
    """L'/L(1, chi) in natural-log units from the full polynomial."""
    return _log_deriv(L.coeffs, L.character.modulus.q)


def log_deriv_at_one_primitive(L: LData) -> complex:
    return _log_deriv(L.primitive_coeffs, L.character.modulus.q)


def i_chi_exact_formula(L: LData) -> float:
    """Closed form for I(chi) through M(chi*), L'/L(1, chi*) and the parity.

    The sign attached to the parity term is +1 when chi* is trivial on the
    constants and -1 otherwise.
    """
    chi = L.character
    if chi.is_principal:
        raise PreconditionError("I(chi) is defined for non-principal characters")
    q = chi.modulus.q
    s = 1.0 if chi.even else -1.0
    two_i = (
        q / (q - 1) * chi.conductor_degree
        + 2 * q / ((q - 1) * math.log(q)) * log_deriv_at_one_primitive(L).real
        - (q * q + q) / (2 * (q - 1) ** 2) * s
        - (3 * q * q - q) / (2 * (q - 1) ** 2)
    )
    return two_i / 2


def psi_power_sum(chi: Character, n: int) -> complex:
    """sum_{deg f = n} chi(f) Lambda(f) / log q."""
    if n < 1:
        raise PreconditionError("n must be positive")
    mod = chi.modulus
    if chi.is_principal:
        return complex(mod.q**n - sum(P.degree for P, _ in mod.factorization.factors if n % P.degree == 0))
    g = l_polynomial(chi).all_gammas()
    return complex(-np.sum(g**n)) if g.size else 0j
