"""Potential, weight, conformal maps and the multiple-scaling maps.

The model weight on the real line is ``w(x) = exp(-n V(x))`` with

    V(x) = 2 x**2 + sum_k t_k (x - lam)**(-k),    k = 1..2m,

and ``t_{2m} > 0`` so that ``w`` has an essential zero at ``x = lam``.
Near the soft edge ``x = 1`` the ensemble is rescaled with the map

    phi(z) = 2 int_1^z sqrt(x**2 - 1) dx,   f(z) = (3 phi(z) / 2)**(2/3),

which is conformal near ``z = 1`` with ``f(1) = 0`` and ``f'(1) = 2``.

All scalar work runs in ``gmpy2`` binary floating point at a caller
chosen precision (``prec`` bits, default 256).
"""
from dataclasses import dataclass, field
from functools import lru_cache
import cmath

import gmpy2
import numpy as np
from gmpy2 import mpfr

DEFAULT_PREC = 256

# radius of the disc around z = 1 on which f_map is served
F_RADIUS = 0.5


def precision(prec):
    """Context manager setting the working precision to ``prec`` bits."""
    return gmpy2.context(gmpy2.get_context(), precision=int(prec))


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


@dataclass(frozen=True)
class TauVector:
    """Scaled parameters (tau_1, ..., tau_{2m}) of the limiting problem."""
    tau: tuple

    def __post_init__(self):
        tau = tuple(float(x) for x in self.tau)
        object.__setattr__(self, "tau", tau)
        if len(tau) == 0 or len(tau) % 2:
            raise DomainError("tau must have even length 2m >= 2")
        if tau[-1] < 0:
            raise DomainError("tau_{2m} must be positive")

    @property
    def m(self):
        return len(self.tau) // 2

    def is_zero(self):
        return all(x == 0 for x in self.tau)

    def __len__(self):
        return len(self.tau)

    def __getitem__(self, k):
        return self.tau[k]

    def __iter__(self):
        return iter(self.tau)


@dataclass(frozen=True)
class EnsembleSpec:
    """A finite-n perturbed GUE instance: weight exp(-n V) with pole at lam.

    ``t`` holds (t_1, ..., t_{2m}); values are converted to ``mpfr`` at
    ``prec`` bits.  ``t = 0`` is the pure GUE weight ``exp(-2 n x**2)``.
    """
    n: int
    lam: object
    t: tuple
    prec: int = DEFAULT_PREC
    m: int = field(init=False)

    def __post_init__(self):
        with precision(self.prec):
            lam = mpfr(self.lam)
            t = tuple(mpfr(x) for x in self.t)
        if self.n < 1:
            raise DomainError("n must be a positive integer")
        if len(t) == 0 or len(t) % 2:
            raise DomainError("t must have even length 2m >= 2")
        if t[-1] < 0 or (t[-1] == 0 and any(x != 0 for x in t)):
            raise DomainError("t_{2m} must be positive (or t identically 0)")
        if not gmpy2.is_finite(lam):
            raise DomainError("lam must be finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "m", len(t) // 2)

    @property
    def trivial(self):
        """True for the unperturbed Gaussian weight."""
        return all(x == 0 for x in self.t)

    def with_lambda(self, lam):
        """Same n and t with the pole moved to ``lam``."""
        return EnsembleSpec(self.n, lam, self.t, self.prec)


def potential_V(spec, x):
    """V(x) = 2 x^2 + sum_k t_k (x - lam)^{-k}; raises at the pole."""
    with precision(spec.prec):
        x = mpfr(x)
        if not spec.trivial and x == spec.lam:
            raise DomainError("V has a pole at x = lam")
        v = 2 * x * x
        if not spec.trivial:
            r = 1 / (x - spec.lam)
            p = r
            for tk in spec.t:
                v += tk * p
                p *= r
        return v


def weight_w(spec, x):
    """w(x) = exp(-n V(x)), with the limit value 0 at x = lam."""
    with precision(spec.prec):
        x = mpfr(x)
        if not spec.trivial and x == spec.lam:
            return mpfr(0)
        return gmpy2.exp(-spec.n * potential_V(spec, x))


def phi(z):
    """phi(z) = z sqrt(z^2-1) - log(z + sqrt(z^2-1)) = 2 int_1^z sqrt(x^2-1) dx.

    Principal branches; the cut is (-inf, 1].  Accepts real or complex
    ``z`` (Python or numpy scalars) and returns the matching double value.
    """
    zc = complex(z)
    if zc.imag == 0 and zc.real <= 1:
        raise DomainError("phi is cut along (-inf, 1]")
    r = cmath.sqrt(zc - 1) * cmath.sqrt(zc + 1)
    if abs(zc - 1) < 1e-2:
        # series in h = z-1 avoids cancellation near the edge
        h = zc - 1
        c = _phi_series(60, 53)
        acc = sum(complex(ck) * h**k for k, ck in enumerate(c))
        val = cmath.sqrt(2 * h) ** 3 * acc * (4 / 3) / 2
    else:
        val = zc * r - cmath.log(zc + r)
    if np.iscomplexobj(z):
        return val
    return val.real


@lru_cache(maxsize=None)
def _phi_series(N, prec):
    """Coefficients g_k with phi(1+h) = (4 sqrt2/3) h^{3/2} sum_k g_k h^k.

    From sqrt(x^2-1) = sqrt(2u) (1 + u/2)^{1/2}, u = x - 1, integrated
    termwise; g_0 = 1.
    """
    with precision(prec):
        out = []
        b = mpfr(1)  # binom(1/2, k) 2^{-k}
        for k in range(N):
            out.append(b * mpfr(3) / (2 * k + 3))
            b = b * (mpfr(1) / 2 - k) / (k + 1) / 2
        return tuple(out)


def _ser_pow(a, p, N):
    """Power series a(h)^p for a[0] = 1 (J.C.P. Miller recursion)."""
    c = [a[0] * 0 + 1] + [a[0] * 0] * (N - 1)
    for k in range(1, N):
        acc = a[0] * 0
        for j in range(1, min(k, len(a) - 1) + 1):
            acc += (p * j - (k - j)) * a[j] * c[k - j]
        c[k] = acc / k
    return c


@lru_cache(maxsize=None)
def f_taylor(prec=DEFAULT_PREC, N=None):
    """Taylor coefficients of f at z = 1, f(1+h) = sum_k F_k h^k.

    f(1+h) = 2 h * G(h)^{2/3} with G the normalized phi series; the
    nearest singularity is z = -1, so the series converges for |h| < 2.
    Default degree keeps the truncation below 2^{-prec} on |h| <= 1/2.
    """
    if N is None:
        N = int(prec / 2) + 20
    with precision(prec + 32):
        g = _phi_series(N, prec + 32)
        gp = _ser_pow(list(g), mpfr(2) / 3, N)
        F = [mpfr(0)] + [2 * gp[k] for k in range(N - 1)]
    with precision(prec):
        return tuple(mpfr(x) for x in F)


def _check_near_one(z, prec):
    with precision(prec):
        if abs(mpfr(z) - 1) >= F_RADIUS:
            raise DomainError("f_map is served on |z - 1| < 1/2")


def f_map(z, prec=DEFAULT_PREC, deriv=0):
    """f(z) = (3 phi(z)/2)^{2/3} (or its ``deriv``-th derivative), real z near 1."""
    _check_near_one(z, prec)
    F = f_taylor(prec)
    with precision(prec):
        h = mpfr(z) - 1
        acc = mpfr(0)
        for k in range(len(F) - 1, deriv - 1, -1):
            coef = F[k]
            for j in range(deriv):
                coef *= (k - j)
            acc = acc * h + coef
        return acc


def _shift_series(F, h0, N):
    """Coefficients of f(lam + e) = sum_i A_i e^i from the series at 1."""
    A = []
    for i in range(N):
        # A_i = sum_k F_k binom(k, i) h0^{k-i}
        acc = F[0] * 0
        for k in range(len(F) - 1, i - 1, -1):
            acc = acc * h0 + F[k] * gmpy2.comb(k, i)
        A.append(acc)
    return A


@dataclass(frozen=True)
class CjkTable:
    """Coefficients of (f(z)-f(lam))^{-j} = sum_{k=0}^j c_jk (z-lam)^{-k} + O(z-lam).

    ``c[j][k]`` for 1 <= j <= 2m, 0 <= k <= j (index 0 of the outer list
    is unused).
    """
    lam: object
    m: int
    c: tuple

    def __call__(self, j, k):
        return self.c[j][k]


def cjk_table(lam, m, prec=DEFAULT_PREC):
    """Laurent coefficients c_jk via series inversion of (f(z)-f(lam))/(z-lam)."""
    _check_near_one(lam, prec)
    F = f_taylor(prec)
    J = 2 * m
    with precision(prec + 16):
        h0 = mpfr(lam) - 1
        A = _shift_series(F, h0, J + 2)
        g = [A[i + 1] for i in range(J + 1)]       # (f(z)-f(lam))/(z-lam)
        g0 = g[0]
        gn = [x / g0 for x in g]
        table = [()]
        for j in range(1, J + 1):
            d = _ser_pow(gn, -j, j + 1)
            scale = g0 ** (-j)
            # (z-lam)^{-j} g^{-j}: coefficient of (z-lam)^{-k} is d_{j-k}
            table.append(tuple(scale * d[j - k] for k in range(j + 1)))
    with precision(prec):
        table = [()] + [tuple(mpfr(x) for x in row) for row in table[1:]]
    return CjkTable(mpfr(lam, prec), m, tuple(table))


def t_from_tau(n, lam, tau, prec=DEFAULT_PREC):
    """t_k = 2 sum_{j>=k} c_jk tau_j n^{-(1 + 2j/3)}, k = 1..2m."""
    tau = tau if isinstance(tau, TauVector) else TauVector(tau)
    m = tau.m
    if tau.is_zero():
        with precision(prec):
            return tuple(mpfr(0) for _ in range(2 * m))
    tab = cjk_table(lam, m, prec)
    with precision(prec):
        nn = mpfr(n)
        t = []
        for k in range(1, 2 * m + 1):
            acc = mpfr(0)
            for j in range(k, 2 * m + 1):
                acc += tab(j, k) * mpfr(tau[j - 1]) * nn ** (-(1 + mpfr(2 * j) / 3))
            t.append(2 * acc)
        return tuple(t)


def s_of_lambda(n, lam, prec=DEFAULT_PREC):
    """s = 2 n^{2/3} (lam - 1)."""
    with precision(prec):
        return 2 * gmpy2.cbrt(mpfr(n)) ** 2 * (mpfr(lam) - 1)


def lambda_of_s(n, s, prec=DEFAULT_PREC):
    """Inverse of ``s_of_lambda``: lam = 1 + s / (2 n^{2/3})."""
    with precision(prec):
        return 1 + mpfr(s) / (2 * gmpy2.cbrt(mpfr(n)) ** 2)


def lambda_of_sloc(n, s, prec=DEFAULT_PREC):
    """lam with n^{2/3} f(lam) = s (Newton from the linear map)."""
    with precision(prec):
        n23 = gmpy2.cbrt(mpfr(n)) ** 2
        target = mpfr(s) / n23
        lam = lambda_of_s(n, s, prec)
        for _ in range(100):
            d = (f_map(lam, prec) - target) / f_map(lam, prec, deriv=1)
            lam -= d
            if abs(d) <= abs(lam) * gmpy2.mul_2exp(mpfr(1), -prec + 4):
                break
        return lam


def ensemble_from_tau(n, s, tau, prec=DEFAULT_PREC):
    """EnsembleSpec at lam = lambda_of_s(n, s) with t = t_from_tau(n, lam, tau).

    c_jk is evaluated at the same lam that is placed in the weight.
    """
    lam = lambda_of_s(n, s, prec)
    return EnsembleSpec(n, lam, t_from_tau(n, lam, tau, prec), prec)
