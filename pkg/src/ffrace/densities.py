"""Densities of prime races by four routes.

* asymptotic main terms in N_m, B_m and C_m;
* Monte Carlo sampling of the limiting random vector
  X_a = -C(a) X' + sum_chi sum_{Im gamma > 0} 2 Re(chi(a) U_gamma) |gamma/(gamma-1)|;
* exact evaluation of the limiting explicit formula when every zero angle is a
  rational multiple of pi;
* exact race counts from the prime-counting engines.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bias import RaceReport, SpectrumBundle, b_m_table, build_spectrum, n_m, race_report
from .characters import all_characters, angle_numerators, exponent_matrix
from .counting import count_primes_in_class, race_trajectory  # noqa: F401  (re-exported)
from .errors import CapExceededError, DegenerateSpectrumError, PreconditionError
from .unitgroup import Modulus, ResidueClass, cm, cm_vector

TIE_TOL = 1e-9
ANGLE_DENOM = 64
PERIOD_CAP = 10**6
MIN_DRAWS = 10**4
DEFAULT_SHARDS = 8
J0_SERIES_LIMIT = 12.0


def xprime_mean(q: int) -> float:
    return (math.sqrt(q) + q) / (2 * (q - 1))


# ordered Gaussian constants

@dataclass
class OrderedGaussianConstants:
    """alpha_j, lambda_j, beta_jk: moments of sorted standard normals over r!.

    ``beta`` is a full r x r array whose strict upper triangle is meaningful.
    """

    r: int
    alpha: np.ndarray
    lam: np.ndarray
    beta: np.ndarray
    method: str
    stderr: float | None = None
    draws: int | None = None

    def zero_sums(self) -> tuple[float, float, float]:
        iu = np.triu_indices(self.r, 1)
        return float(self.alpha.sum()), float(self.lam.sum()), float(self.beta[iu].sum())


def _closed_form(r: int) -> OrderedGaussianConstants:
    sp = math.sqrt(math.pi)
    if r == 2:
        alpha = np.array([1 / (2 * sp), -1 / (2 * sp)])
        lam = np.zeros(2)
        beta = np.zeros((2, 2))
    else:
        s3 = math.sqrt(3)
        alpha = np.array([1 / (4 * sp), 0.0, -1 / (4 * sp)])
        # E[Z_(1)^2] = 1 + sqrt3/(2 pi) for the largest of three normals
        lam = np.array([s3 / (2 * math.pi), -s3 / math.pi, s3 / (2 * math.pi)]) / 6
        beta = np.zeros((3, 3))
        beta[0, 1] = beta[1, 2] = 1 / (4 * math.pi * s3)
        beta[0, 2] = -1 / (2 * math.pi * s3)
    return OrderedGaussianConstants(r, alpha, lam, beta, "closed_form")


def _monte_carlo(r: int, seed: int, target_stderr: float, batch: int = 200_000) -> OrderedGaussianConstants:
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(r, 1)

    def stats(n):
        z = -np.sort(-rng.standard_normal((n, r)), axis=1)
        prods = z[:, iu[0]] * z[:, iu[1]]
        return np.hstack([z, z * z - 1, prods])

    pilot = stats(batch)
    sd = pilot.std(axis=0, ddof=1).max() / math.factorial(r)
    need = int(math.ceil((sd / target_stderr) ** 2 * 1.1))
    s1 = pilot.sum(axis=0)
    s2 = (pilot * pilot).sum(axis=0)
    n = batch
    while n < need:
        k = min(batch, need - n)
        x = stats(k)
        s1 += x.sum(axis=0)
        s2 += (x * x).sum(axis=0)
        n += k
    mean = s1 / n
    var = (s2 / n - mean**2) * n / (n - 1)
    f = math.factorial(r)
    mean /= f
    stderr = float(np.sqrt(var.max() / n) / f)
    alpha, lam = mean[:r], mean[r : 2 * r]
    beta = np.zeros((r, r))
    beta[iu] = mean[2 * r :]
    return OrderedGaussianConstants(r, alpha, lam, beta, "monte_carlo", stderr, n)


QUAD_HALF_WIDTH = 12.0  # phi(12) ~ 1e-32, far below double precision
QUAD_PANEL = 0.25
QUAD_NODES = 20


def _quadrature(r: int) -> OrderedGaussianConstants:
    """Order-statistic integrals by composite Gauss-Legendre on [-12, 12].

    The inner integral of a pair moment runs up to the outer node x; writing
    (F(x) - F(y))^b binomially turns it into running integrals
    G_n(x) = int_{-inf}^x y phi(y) F(y)^n dy shared by every outer node.
    """
    from scipy import special

    f = math.factorial(r)
    t, w = np.polynomial.legendre.leggauss(QUAD_NODES)
    edges = np.arange(-QUAD_HALF_WIDTH, QUAD_HALF_WIDTH + QUAD_PANEL / 2, QUAD_PANEL)
    lo, h = edges[:-1], QUAD_PANEL
    x = (lo[:, None] + h * (t[None, :] + 1) / 2).ravel()
    wx = np.repeat(np.full(lo.size, h / 2), QUAD_NODES) * np.tile(w, lo.size)
    pdf = np.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    cdf = special.ndtr(x)
    sf = special.ndtr(-x)

    # running integrals G_n at every outer node: whole panels before it plus a partial piece
    start = np.repeat(lo, QUAD_NODES)
    y = start[:, None] + (x - start)[:, None] * (t[None, :] + 1) / 2
    wy = (x - start)[:, None] / 2 * w[None, :]
    py = np.exp(-y * y / 2) / math.sqrt(2 * math.pi)
    Fy = special.ndtr(y)

    def running(n):
        per_panel = (wx * x * pdf * cdf**n).reshape(lo.size, QUAD_NODES).sum(axis=1)
        before = np.repeat(np.concatenate([[0.0], np.cumsum(per_panel)[:-1]]), QUAD_NODES)
        return before + (wy * y * py * Fy**n).sum(axis=1)

    G = {n: running(n) for n in range(r)}

    def single(j, g):
        c = f / (math.factorial(j - 1) * math.factorial(r - j))
        return float(np.sum(wx * g * c * pdf * cdf ** (r - j) * sf ** (j - 1)))

    def pair(j, k):
        a, b = r - k, k - j - 1
        c = f / (math.factorial(j - 1) * math.factorial(b) * math.factorial(r - k))
        inner = sum(math.comb(b, i) * (-1) ** i * cdf ** (b - i) * G[a + i] for i in range(b + 1))
        return float(np.sum(wx * c * x * pdf * sf ** (j - 1) * inner))

    alpha = np.array([single(j, x) for j in range(1, r + 1)]) / f
    lam = np.array([single(j, x * x - 1) for j in range(1, r + 1)]) / f
    beta = np.zeros((r, r))
    for j, k in itertools.combinations(range(1, r + 1), 2):
        beta[j - 1, k - 1] = pair(j, k) / f
    return OrderedGaussianConstants(r, alpha, lam, beta, "quadrature")


def ordered_gaussian_constants(r: int, method: str = "auto", seed: int = 0, target_stderr: float = 1e-4) -> OrderedGaussianConstants:
    """Closed forms for r <= 3, Monte Carlo (sorting trick) for r >= 4.

    ``method`` may force ``closed_form``, ``monte_carlo`` or ``quadrature``.
    """
    if not 2 <= r <= 6:
        raise PreconditionError("r must lie in 2..6")
    if method == "auto":
        method = "closed_form" if r <= 3 else "monte_carlo"
    if method == "closed_form":
        if r > 3:
            raise PreconditionError("closed forms are available only for r <= 3")
        return _closed_form(r)
    if method == "monte_carlo":
        return _monte_carlo(r, seed, target_stderr)
    if method == "quadrature":
        return _quadrature(r)
    raise PreconditionError(f"unknown method {method!r}")


# Bessel J0 and the Fourier transform

_J0_P = (1.0, -9 / 128, 3675 / 32768, -2401245 / 4194304)
_J0_Q = (-1 / 8, 75 / 1024, -59535 / 262144, 57972915 / 33554432)


def bessel_j0(z) -> np.ndarray:
    """J0 by its power series for |z| <= 12 and Hankel's expansion beyond (abs. error < 2e-9)."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z <= J0_SERIES_LIMIT
    if small.any():
        x = (z[small] / 2) ** 2
        term = np.ones_like(x)
        acc = np.ones_like(x)
        for k in range(1, 60):
            term = -term * x / (k * k)
            acc += term
        out[small] = acc
    big = ~small
    if big.any():
        x = z[big]
        y = 1 / (x * x)
        P = _J0_P[0] + y * (_J0_P[1] + y * (_J0_P[2] + y * _J0_P[3]))
        Q = (_J0_Q[0] + y * (_J0_Q[1] + y * (_J0_Q[2] + y * _J0_Q[3]))) / x
        chi = x - math.pi / 4
        out[big] = np.sqrt(2 / (math.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))
    return out


def _class_coefficients(spec: SpectrumBundle, classes: Sequence[ResidueClass]) -> np.ndarray:
    """chi(a_j) for every positive zero (rows) and class (columns)."""
    mod = spec.modulus
    E = exponent_matrix(mod)[spec.char_index]
    Y = np.array([c.exps for c in classes], dtype=np.int64).reshape(len(classes), mod.rank)
    k = angle_numerators(mod, E, Y)
    return np.exp(2j * np.pi * k / mod.exponent)


def _bcal(q: int, C: np.ndarray, t: np.ndarray) -> complex:
    s = float(np.dot(C, t))
    return 0.5 * (np.exp(1j * math.sqrt(q) / (q - 1) * s) + np.exp(1j * q / (q - 1) * s))


def mu_hat_log(spec: SpectrumBundle, classes: Sequence, t) -> tuple[float, complex]:
    """(log |mu_hat(t)|, unit phase) so tiny values survive underflow."""
    mod = spec.modulus
    cls = [mod.residue(a) for a in classes]
    t = np.asarray(t, dtype=float)
    if t.shape != (len(cls),):
        raise PreconditionError("t must have one entry per class")
    C = np.array([cm(c, mod) for c in cls], dtype=float)
    B = _bcal(mod.q, C, t)
    if spec.size:
        arg = 2 * spec.weight * np.abs(_class_coefficients(spec, cls) @ t)
        j = bessel_j0(arg)
    else:
        j = np.ones(0)
    if B == 0 or np.any(j == 0):
        return -math.inf, 1 + 0j
    sign = -1.0 if np.count_nonzero(j < 0) % 2 else 1.0
    log_abs = math.fsum(np.log(np.abs(j))) + math.log(abs(B))
    return log_abs, sign * B / abs(B)


def mu_hat(spec: SpectrumBundle, classes: Sequence, t) -> complex:
    """Fourier transform of the limiting distribution.

    With the two-point factor written as exp(+i ...), this equals
    E[exp(-i t.X)] for X_a = -C(a) X' + (oscillating part).
    """
    log_abs, phase = mu_hat_log(spec, classes, t)
    return complex(phase * math.exp(log_abs)) if log_abs > -745 else 0j


# asymptotic formulas

@dataclass
class AsymptoticDensity:
    value: float
    error_scale: float
    mode: str
    terms: dict = field(default_factory=dict)


def density_asymptotic_r2(report: RaceReport) -> AsymptoticDensity:
    """1/2 - (sqrt q + q)/(2(q-1)) (C(a)-C(b)) / sqrt(2 pi V), V = 2(N - B)."""
    if len(report.classes) != 2:
        raise PreconditionError("density_asymptotic_r2 needs exactly two classes")
    q = report.q
    V = report.V[0, 1]
    if not V > 0:
        raise DegenerateSpectrumError(f"V_m(a, b) = {V} is not positive")
    dC = float(report.C[0] - report.C[1])
    val = 0.5 - (math.sqrt(q) + q) / (2 * (q - 1)) * dC / math.sqrt(2 * math.pi * V)
    return AsymptoticDensity(val, report.C_one**2 * report.M / report.phi, "r2", {"V": V})


def density_asymptotic_r3plus(report: RaceReport, constants: OrderedGaussianConstants | None = None, mode: str = "full") -> AsymptoticDensity:
    """Main terms for r >= 3.

    ``full`` keeps the alpha, beta.B, lambda.C^2 and beta.C.C blocks;
    ``first_order`` drops the last two; ``cor2`` is the r = 3 closed form;
    ``cor3`` assumes all classes are residues or all are non-residues.
    """
    r = len(report.classes)
    if not 3 <= r <= 6:
        raise PreconditionError("density_asymptotic_r3plus needs 3 <= r <= 6")
    q, N = report.q, report.N_m
    C = report.C.astype(float)
    B = report.B
    iu = np.triu_indices(r, 1)
    const = constants if constants is not None else ordered_gaussian_constants(r)
    if const.r != r:
        raise PreconditionError("constants were computed for a different r")
    base = 1 / math.factorial(r)
    t_alpha = -(q + math.sqrt(q)) / (2 * math.sqrt(N) * (q - 1)) * float(np.dot(const.alpha, C))
    t_beta = float(np.sum(const.beta[iu] * B[iu])) / N
    t_lam = (q + q * q) / (4 * N * (q - 1) ** 2) * (
        float(np.dot(const.lam, C * C)) + 2 * float(np.sum(const.beta[iu] * C[iu[0]] * C[iu[1]]))
    )
    Cm = float(np.max(np.abs(C)))
    Bm = float(np.max(np.abs(B[iu])))
    err = 1 / N + Cm * Bm / N**1.5 + Bm**2 / N**2
    if mode == "full":
        val = base + t_alpha + t_beta + t_lam
    elif mode == "first_order":
        val = base + t_alpha + t_beta
        err = Cm**2 / N + Bm**2 / N**2
    elif mode == "cor2":
        if r != 3:
            raise PreconditionError("cor2 mode is the r = 3 formula")
        val = (
            1 / 6
            + (q + math.sqrt(q)) / (8 * math.sqrt(math.pi * N) * (q - 1)) * (C[2] - C[0])
            + (B[0, 1] + B[1, 2] - 2 * B[0, 2]) / (4 * math.pi * math.sqrt(3) * N)
        )
        err = Cm**2 / N + Bm**2 / N**2
    elif mode == "cor3":
        if len(set(C.tolist())) != 1:
            raise PreconditionError("cor3 mode needs all classes residues or all non-residues")
        val = base + t_beta
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    return AsymptoticDensity(val, err, mode, {"alpha": t_alpha, "beta_B": t_beta, "lambda_C2": t_lam})


def asymptotic_density(spec: SpectrumBundle, classes: Sequence, mode: str = "full") -> AsymptoticDensity:
    rep = race_report(spec, classes)
    if len(rep.classes) == 2:
        return density_asymptotic_r2(rep)
    return density_asymptotic_r3plus(rep, mode=mode)


# Monte Carlo

@dataclass
class MonteCarloResult:
    """Everything collected in one sampling pass over a fixed tuple.

    ``perm_counts[k]`` counts draws whose descending order of classes is the
    k-th entry of ``perms``; with antithetic pairing ``pair_counts`` holds the
    joint table over (draw, partner draw).
    """

    classes: list[ResidueClass]
    draws: int
    seed: int
    antithetic: bool
    perms: list[tuple[int, ...]]
    perm_counts: np.ndarray
    pair_counts: np.ndarray | None
    mean: np.ndarray
    covariance: np.ndarray
    covariance_stderr: np.ndarray
    probes: np.ndarray
    charfn: np.ndarray
    charfn_stderr: np.ndarray  # (k, 2): real and imaginary parts

    def density(self, order: Sequence[int] | None = None) -> tuple[float, float]:
        """P(X_{o1} > X_{o2} > ...), zero-based class positions; with stderr."""
        order = tuple(range(len(self.classes))) if order is None else tuple(order)
        k = self.perms.index(order)
        n = self.draws
        if self.pair_counts is None:
            p = self.perm_counts[k] / n
            return float(p), math.sqrt(max(p * (1 - p), 0.0) / n)
        P = self.pair_counts
        pairs = P.sum()
        both = P[k, k]
        one = P[k, :].sum() + P[:, k].sum() - 2 * both
        mean = (2 * both + one) / (2 * pairs)
        second = (both + one / 4) / pairs
        var = max(second - mean**2, 0.0)
        return float(mean), math.sqrt(var / pairs)


class LimitingSampler:
    """Draws of the limiting random vector for one tuple of classes."""

    def __init__(self, spec: SpectrumBundle, classes: Sequence, seed: int):
        mod = spec.modulus
        if spec.size == 0:
            raise DegenerateSpectrumError("no positive-imaginary zeros; use the periodic engine")
        if seed is None:
            raise PreconditionError("a seed is required for Monte Carlo")
        self.spec = spec
        self.classes = [mod.residue(a) for a in classes]
        if len({c.rep for c in self.classes}) != len(self.classes):
            raise PreconditionError("classes must be pairwise distinct")
        self.seed = int(seed)
        self.q = mod.q
        self.C = np.array([cm(c, mod) for c in self.classes], dtype=float)
        coef = _class_coefficients(spec, self.classes) * (2 * spec.weight)[:, None]
        # X_osc = cos(theta) @ A + sin(theta) @ Bm
        self.A = np.ascontiguousarray(coef.real, dtype=np.float32)
        self.Bm = np.ascontiguousarray(-coef.imag, dtype=np.float32)
        self.A64 = coef.real
        self.Bm64 = -coef.imag
        self.xvals = np.array([math.sqrt(self.q) / (self.q - 1), self.q / (self.q - 1)])
        self.mu = -self.C * xprime_mean(self.q)

    def _oscillating(self, rng: np.random.Generator, n: int, buf) -> np.ndarray:
        th, c, s = buf
        th, c, s = th[:n], c[:n], s[:n]
        rng.random(out=th, dtype=np.float32)
        th *= np.float32(2 * math.pi)
        np.cos(th, out=c)
        np.sin(th, out=s)
        X = (c @ self.A + s @ self.Bm).astype(np.float64)
        # float32 accumulation can tie two coordinates; redo those rows in float64
        r = X.shape[1]
        if r > 1:
            srt = np.sort(X, axis=1)
            tied = np.flatnonzero((np.diff(srt, axis=1) == 0).any(axis=1))
            if tied.size:
                X[tied] = c[tied].astype(np.float64) @ self.A64 + s[tied].astype(np.float64) @ self.Bm64
        return X

    def _shard(self, ss: np.random.SeedSequence, n: int, antithetic: bool, probes: np.ndarray, batch: int):
        rng = np.random.default_rng(ss)
        r = len(self.classes)
        Z = self.A.shape[0]
        perms = list(itertools.permutations(range(r)))
        code_of = {p: i for i, p in enumerate(perms)}
        lookup = np.full(r**r, -1, dtype=np.int64)
        for p, i in code_of.items():
            lookup[int(np.dot(p, r ** np.arange(r)))] = i
        radix = r ** np.arange(r)
        nperm = len(perms)
        perm_counts = np.zeros(nperm, dtype=np.int64)
        pair_counts = np.zeros((nperm, nperm), dtype=np.int64) if antithetic else None
        sx = np.zeros(r)
        s1 = np.zeros((r, r))
        s2 = np.zeros((r, r))
        kp = len(probes)
        c1 = np.zeros((kp, 2))
        c2 = np.zeros((kp, 2))
        units = 0
        bs = batch
        buf = (np.empty((bs, Z), np.float32), np.empty((bs, Z), np.float32), np.empty((bs, Z), np.float32))
        remaining = n // 2 if antithetic else n
        while remaining > 0:
            m = min(bs, remaining)
            remaining -= m
            Xo = self._oscillating(rng, m, buf)
            xi = rng.integers(0, 2, size=m)
            if antithetic:
                X1 = Xo - np.outer(self.xvals[xi], self.C)
                X2 = -Xo - np.outer(self.xvals[1 - xi], self.C)
                groups = (X1, X2)
            else:
                groups = (Xo - np.outer(self.xvals[xi], self.C),)
            codes = []
            for X in groups:
                order = np.argsort(-X, axis=1, kind="stable")
                idx = lookup[order @ radix]
                codes.append(idx)
                perm_counts += np.bincount(idx, minlength=nperm)
                sx += X.sum(axis=0)
            if antithetic:
                np.add.at(pair_counts, (codes[0], codes[1]), 1)
            # per unit (draw, or antithetic pair) statistics
            cent = [X - self.mu for X in groups]
            prod = sum(np.einsum("ij,ik->ijk", D, D) for D in cent) / len(groups)
            s1 += prod.sum(axis=0)
            s2 += (prod * prod).sum(axis=0)
            if kp:
                ph = [X @ probes.T for X in groups]
                cs = sum(np.cos(p) for p in ph) / len(groups)
                sn = sum(-np.sin(p) for p in ph) / len(groups)
                c1[:, 0] += cs.sum(axis=0)
                c1[:, 1] += sn.sum(axis=0)
                c2[:, 0] += (cs * cs).sum(axis=0)
                c2[:, 1] += (sn * sn).sum(axis=0)
            units += m
        return perm_counts, pair_counts, sx, s1, s2, c1, c2, units

    def run(self, draws: int = 10**6, antithetic: bool = True, probes=None, shards: int = DEFAULT_SHARDS,
            threads: int = 1, batch: int = 256) -> MonteCarloResult:
        if draws < MIN_DRAWS:
            raise PreconditionError(f"draws must be at least {MIN_DRAWS}")
        if antithetic and draws % 2:
            draws += 1
        r = len(self.classes)
        probes = np.zeros((0, r)) if probes is None else np.atleast_2d(np.asarray(probes, dtype=float))
        children = np.random.SeedSequence(self.seed).spawn(shards)
        step = 2 if antithetic else 1
        per = [(draws // step) // shards + (1 if i < (draws // step) % shards else 0) for i in range(shards)]
        jobs = [(ss, k * step) for ss, k in zip(children, per) if k]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(lambda a: self._shard(a[0], a[1], antithetic, probes, batch), jobs))
        else:
            parts = [self._shard(ss, k, antithetic, probes, batch) for ss, k in jobs]
        perm_counts = sum(p[0] for p in parts)
        pair_counts = sum(p[1] for p in parts) if antithetic else None
        sx = sum(p[2] for p in parts)
        s1 = sum(p[3] for p in parts)
        s2 = sum(p[4] for p in parts)
        c1 = sum(p[5] for p in parts)
        c2 = sum(p[6] for p in parts)
        units = sum(p[7] for p in parts)
        n = units * step
        mean = sx / n
        d = mean - self.mu
        cov = s1 / units - np.outer(d, d)
        var = s2 / units - (s1 / units) ** 2
        cov_se = np.sqrt(np.maximum(var, 0) / units)
        cf = c1 / units
        cf_se = np.sqrt(np.maximum(c2 / units - cf**2, 0) / units)
        return MonteCarloResult(
            classes=self.classes,
            draws=n,
            seed=self.seed,
            antithetic=antithetic,
            perms=list(itertools.permutations(range(r))),
            perm_counts=perm_counts,
            pair_counts=pair_counts,
            mean=mean,
            covariance=cov,
            covariance_stderr=cov_se,
            probes=probes,
            charfn=cf[:, 0] + 1j * cf[:, 1],
            charfn_stderr=cf_se,
        )


def density_monte_carlo(spec: SpectrumBundle, classes: Sequence, draws: int = 10**6, seed: int = 0,
                        antithetic: bool = True, threads: int = 1) -> tuple[float, float]:
    res = LimitingSampler(spec, classes, seed).run(draws, antithetic=antithetic, threads=threads)
    return res.density()


def default_probes(spec: SpectrumBundle, r: int) -> np.ndarray:
    """Five fixed t-vectors scaled so that mu_hat is of order one."""
    base = np.array([
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.5, -0.5, 0.0, 0.0, 0.0, 0.0],
        [0.3, 0.3, 0.3, 0.3, 0.3, 0.3],
        [0.7, -0.2, 0.4, -0.1, 0.2, 0.0],
        [-0.4, 0.9, 0.1, 0.3, -0.2, 0.5],
    ])[:, :r]
    return base / math.sqrt(n_m(spec))


# exact periodic engine

@dataclass
class PeriodicSpectrum:
    """Limit of E_{m;a}(X) as a finite trigonometric sum with rational angles."""

    modulus: Modulus
    classes: list[ResidueClass]
    angles: list[Fraction]  # theta / pi
    coeffs: np.ndarray  # (zeros, classes): -conj(chi(a)) gamma/(gamma-1)
    C: np.ndarray
    period: int

    def bcal(self, X: np.ndarray) -> np.ndarray:
        q = self.modulus.q
        return np.where(X % 2 == 0, q / (q - 1), math.sqrt(q) / (q - 1))

    def limits(self, X: Sequence[int] | None = None, parity_flip: bool = False) -> np.ndarray:
        """E-limits, shape (len(X), classes); X defaults to 0..L-1."""
        X = np.arange(self.period) if X is None else np.asarray(X)
        th = np.array([float(a) for a in self.angles]) * math.pi
        osc = (np.exp(1j * np.outer(X, th)) @ self.coeffs).real if len(th) else np.zeros((len(X), len(self.classes)))
        b = self.bcal(X + (1 if parity_flip else 0))
        return -np.outer(b, self.C) + osc


def periodic_spectrum(mod: Modulus, classes: Sequence) -> PeriodicSpectrum:
    cls = [mod.residue(a) for a in classes]
    datas = build_spectrum(mod).ldata
    chars = all_characters(mod)
    E = exponent_matrix(mod)
    Y = np.array([c.exps for c in cls], dtype=np.int64).reshape(len(cls), mod.rank)
    vals = np.exp(2j * np.pi * angle_numerators(mod, E, Y) / mod.exponent)
    angles, rows = [], []
    L = 2
    for Ld in datas:
        if Ld.character.is_principal:
            continue
        for z in Ld.sqrt_q_zeros:
            t = math.atan2(z.gamma.imag, z.gamma.real) / math.pi
            fr = Fraction(t).limit_denominator(ANGLE_DENOM)
            if abs(float(fr) - t) > TIE_TOL:
                raise PreconditionError(f"spectrum not commensurate: angle {t}*pi of a zero of character {Ld.character.index}")
            w = -np.conj(vals[Ld.character.index]) * (z.gamma / (z.gamma - 1))
            for _ in range(z.multiplicity):
                angles.append(fr)
                rows.append(w)
            a, b = fr.numerator, fr.denominator
            L = math.lcm(L, 2 * b // math.gcd(a, 2 * b))
            if L > PERIOD_CAP:
                raise CapExceededError(f"period {L} exceeds {PERIOD_CAP}")
    del chars
    coeffs = np.array(rows, dtype=complex).reshape(len(rows), len(cls))
    C = np.array([cm(c, mod) for c in cls], dtype=float)
    return PeriodicSpectrum(mod, cls, angles, coeffs, C, L)


@dataclass
class PeriodicDensity:
    density: Fraction
    lower: Fraction
    upper: Fraction
    period: int
    tie_classes: list[int]
    strict_classes: list[int]
    limits: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "density": str(self.density),
            "lower": str(self.lower),
            "upper": str(self.upper),
            "period": self.period,
            "tie_classes": self.tie_classes,
            "strict_classes": self.strict_classes,
        }


def _ordering_status(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(strict, weak-with-tie) masks for E_1 > E_2 > ... > E_r row by row."""
    d = -np.diff(E, axis=1)
    scale = max(1.0, float(np.max(np.abs(E)))) if E.size else 1.0
    strict = (d > TIE_TOL * scale).all(axis=1)
    weak = (d >= -TIE_TOL * scale).all(axis=1) & ~strict
    return strict, weak


def density_exact_periodic(mod: Modulus, classes: Sequence, parity_flip: bool = False) -> PeriodicDensity:
    """Exact density of the strict ordering of the limiting E-vector.

    Residues of X mod L where two neighbours tie (within 1e-9) are excluded
    and reported; ``lower``/``upper`` bracket what the ties could contribute.
    """
    ps = periodic_spectrum(mod, classes)
    E = ps.limits(parity_flip=parity_flip)
    strict, weak = _ordering_status(E)
    L = ps.period
    return PeriodicDensity(
        density=Fraction(int(strict.sum()), L),
        lower=Fraction(int(strict.sum()), L),
        upper=Fraction(int(strict.sum() + weak.sum()), L),
        period=L,
        tie_classes=[int(x) for x in np.flatnonzero(weak)],
        strict_classes=[int(x) for x in np.flatnonzero(strict)],
        limits=E,
    )


# counting engine

@dataclass
class CountDensity:
    density: Fraction
    X_min: int
    X_max: int
    ordered_X: list[int]


def density_count(mod: Modulus, classes: Sequence, X_max: int, X_min: int = 1) -> CountDensity:
    """Fraction of X in [X_min, X_max] with strictly ordered exact partial sums."""
    if not 1 <= X_min <= X_max:
        raise PreconditionError("need 1 <= X_min <= X_max")
    tr = race_trajectory(mod, classes, X_max)
    hits = []
    for X in range(X_min, X_max + 1):
        s = tr.partial_sums[X - 1]
        if all(s[j] > s[j + 1] for j in range(len(s) - 1)):
            hits.append(X)
    return CountDensity(Fraction(len(hits), X_max - X_min + 1), X_min, X_max, hits)


@dataclass
class ParityCalibration:
    X: list[int]
    deviation_default: float
    deviation_flipped: float
    chosen: str


def parity_calibration(mod: Modulus, classes: Sequence, X_lo: int = 30, X_hi: int = 44) -> ParityCalibration:
    """Compare exact trajectories with the periodic limits under both phases of the two-point term."""
    tr = race_trajectory(mod, classes, X_hi)
    ps = periodic_spectrum(mod, classes)
    X = np.arange(X_lo, X_hi + 1)
    got = tr.E[X - 1]
    dev0 = float(np.max(np.abs(got - ps.limits(X))))
    dev1 = float(np.max(np.abs(got - ps.limits(X, parity_flip=True))))
    return ParityCalibration(X.tolist(), dev0, dev1, "default" if dev0 <= dev1 else "flipped")


# extremes

@dataclass
class DeltaExtremes:
    delta: float
    witness: tuple[str, ...]
    witness_density: float
    tuples_checked: int
    exhaustive: bool
    engine: str


def _all_tuples(phi: int, r: int, max_tuples: int, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    if phi < r:
        raise PreconditionError("fewer units than competitors")
    if phi**r <= 10**6:
        return np.array(list(itertools.permutations(range(phi), r)), dtype=np.int64), True
    out = set()
    while len(out) < max_tuples:
        t = tuple(int(x) for x in rng.choice(phi, size=r, replace=False))
        out.add(t)
    return np.array(sorted(out), dtype=np.int64), False


def delta_extremes(mod: Modulus, r: int, engine: str = "periodic", max_tuples: int = 2000, seed: int = 0,
                   draws: int = 10**5, X_max: int = 60) -> DeltaExtremes:
    """max over tuples of |delta - 1/r!|, exhaustive when phi^r <= 1e6."""
    rng = np.random.default_rng(seed)
    tuples, exhaustive = _all_tuples(mod.phi, r, max_tuples if engine != "mc" else min(max_tuples, 20), rng)
    units = mod.units()  # row order of unit_codes
    target = 1 / math.factorial(r)
    if engine == "periodic":
        ps = periodic_spectrum(mod, units)
        E = ps.limits()
        d = np.zeros(len(tuples))
        for s in range(0, len(tuples), 4096):
            blk = tuples[s : s + 4096]
            sub = E[:, blk]  # (L, n, r)
            diff = -np.diff(sub, axis=2)
            scale = max(1.0, float(np.max(np.abs(E))))
            d[s : s + len(blk)] = (diff > TIE_TOL * scale).all(axis=2).mean(axis=0)
    elif engine == "asymptotic":
        d = _asymptotic_many(mod, tuples)
    elif engine == "mc":
        spec = build_spectrum(mod)
        d = np.array([LimitingSampler(spec, [units[i] for i in t], seed).run(draws).density()[0] for t in tuples])
    elif engine == "count":
        tr = race_trajectory(mod, units, X_max)
        S = np.array(tr.partial_sums, dtype=object)
        d = np.array([
            np.mean([all(row[t[j]] > row[t[j + 1]] for j in range(r - 1)) for row in S]) for t in tuples
        ])
    else:
        raise PreconditionError(f"unknown engine {engine!r}")
    dev = np.abs(d - target)
    k = int(np.argmax(dev))
    return DeltaExtremes(float(dev[k]), tuple(str(units[i]) for i in tuples[k]), float(d[k]), len(tuples), exhaustive, engine)


def _asymptotic_many(mod: Modulus, tuples: np.ndarray) -> np.ndarray:
    spec = build_spectrum(mod)
    table = b_m_table(spec)
    N = n_m(spec)
    q = mod.q
    C = cm_vector(mod).astype(float)
    dl = mod.dlogs
    r = tuples.shape[1]

    def B(j, k):
        return table[mod.flat_of_dlogs(dl[tuples[:, j]] - dl[tuples[:, k]])]

    Ct = C[tuples]
    if r == 2:
        V = 2 * (N - B(0, 1))
        if np.any(V <= 0):
            raise DegenerateSpectrumError("V_m(a, b) is not positive for some pair")
        return 0.5 - (math.sqrt(q) + q) / (2 * (q - 1)) * (Ct[:, 0] - Ct[:, 1]) / np.sqrt(2 * math.pi * V)
    const = ordered_gaussian_constants(r)
    val = np.full(len(tuples), 1 / math.factorial(r))
    val -= (q + math.sqrt(q)) / (2 * math.sqrt(N) * (q - 1)) * (Ct @ const.alpha)
    lam = Ct * Ct @ const.lam
    for j, k in itertools.combinations(range(r), 2):
        val += const.beta[j, k] * B(j, k) / N
        lam += 2 * const.beta[j, k] * Ct[:, j] * Ct[:, k]
    val += (q + q * q) / (4 * N * (q - 1) ** 2) * lam
    return val
