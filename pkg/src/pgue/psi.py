"""The limiting kernel K_Psi from the zeta-equation of the Lax pair.

For x > 0 the first column of Psi (recessive at +infinity) is started
from the formal expansion at zeta = R and integrated inward, where it
is dominant, so errors in the starting data decay.  For x < 0 the
combination Psi_+ (1, 1)^T is started at zeta = -R + i0, where both
formal columns are oscillatory and of equal size, and carried along
the negative axis.  Both paths become unstable where psi decays in
the direction of integration: next to zeta = 0, where psi is
recessive like exp(-sum tau_k zeta^{-k}), and for s > 0 on (-s, 0).
Between a matching point x_1 and 0 the solution recessive at 0 is
carried outward instead and scaled to psi(x_1).  Then

    K_Psi(u, v) = (psi_1(v) psi_2(u) - psi_1(u) psi_2(v)) / (2 pi i (u - v)).

At tau = 0 the equation is the shifted Airy equation and
psi(x) = sqrt(2 pi) e^{-i pi/4} (Ai, Ai')(x + s), so K_Psi = K_Ai.
"""
from dataclasses import dataclass
import cmath
import math

import numpy as np
from scipy.special import airy

from . import lax
from .lax import PathError


class AccuracyError(RuntimeError):
    """Estimated error of the initial data at |zeta| = R exceeds the tolerance."""


class ConsistencyError(RuntimeError):
    """Kernel value has a non-negligible imaginary part."""


@dataclass(frozen=True)
class LaxCoefficients:
    """A_0 and A_1..A_K of the zeta-equation at one value of s."""
    s: float
    A0: np.ndarray
    Ak: np.ndarray
    state: np.ndarray

    @classmethod
    def from_state(cls, state):
        """From a P34State (or anything with ``s`` and ``vector``)."""
        return cls.from_vector(state.s, state.vector)

    @classmethod
    def from_vector(cls, s, x):
        x = np.asarray(x, float).copy()
        A0, Ak = lax.lax_coefficients(x, s)
        return cls(float(s), A0, Ak, x)

    @classmethod
    def airy(cls, s, m=1):
        """The tau = 0 coefficients (all A_k vanish)."""
        return cls.from_vector(s, np.zeros(3 * (2 * m + 1)))

    @property
    def K(self):
        return len(self.Ak)


def lax_matrix(coeffs, zeta):
    """A(zeta) = sum_k A_k zeta^{-k} + zeta sigma_-; raises at zeta = 0."""
    return lax.lax_matrix(coeffs.state, coeffs.s, zeta)


def det_A_coefficients(coeffs, rho=0.5, N=256):
    """Laurent coefficients d_p of det A(zeta) = sum_p d_p zeta^{-p}, p = -1..2K.

    Obtained by the discrete Fourier transform of det A on |zeta| = rho;
    det A is a Laurent polynomial, so this is exact up to rounding
    for N > 2K + 2.
    """
    th = 2 * np.pi * np.arange(N) / N
    z = rho * np.exp(1j * th)
    d = np.array([np.linalg.det(lax_matrix(coeffs, zz)) for zz in z])
    out = {}
    for p in range(-1, 2 * coeffs.K + 1):
        out[p] = np.mean(d * z ** p)
    return out


@dataclass(frozen=True)
class PsiVector:
    """(psi_1, psi_2) at real x and their zeta-derivatives from the Lax equation."""
    x: float
    psi1: complex
    psi2: complex
    dpsi1: complex
    dpsi2: complex
    error_estimate: float = 0.0

    @property
    def vector(self):
        return np.array([self.psi1, self.psi2])

    def realness_defect(self):
        """Relative imaginary part after removing the constant e^{-i pi/4} phase."""
        v = self.vector * cmath.exp(0.25j * math.pi)
        return float(np.max(np.abs(v.imag)) / max(np.max(np.abs(v)), 1e-300))


def match_point(s, x):
    """Point x_1 where the recessive-at-0 route is scaled to psi, or None.

    x_1 = 1 on the right and -(max(1, s) + 1) on the left (beyond the
    turning point x = -s).
    """
    x1 = 1.0 if x > 0 else -(max(1.0, s) + 1.0)
    return x1 if abs(x) < abs(x1) else None


def default_radius(s, x):
    x1 = match_point(s, x) if x != 0 else None
    return max(50.0, 10 * abs(s), 10 * abs(x if x1 is None else x1))


def _tail_estimate(coeffs, zeta, sign, J):
    # size of the last retained term of the exponent series at zeta
    sig = lax.formal_exponent(coeffs.state, coeffs.s, sign, J)
    t = abs(zeta) ** -0.5
    return abs(sig[J + 1]) * t ** (J - 2) / abs(1 - J / 2)


def _from_infinity(coeffs, x, R, rtol, eps, J):
    st, s = coeffs.state, coeffs.s
    if x > 0:
        z0 = R * cmath.exp(1j * eps)
        y0, l0 = lax.formal_column(st, s, z0, -1, J)
        err = _tail_estimate(coeffs, z0, -1, J)
    else:
        z0 = complex(-R, 0.0)
        y1, l1 = lax.formal_column(st, s, z0, -1, J)
        y2, l2 = lax.formal_column(st, s, z0, +1, J)
        # both exponents are oscillatory here; combine at a common scale
        l0 = (l1 + l2) / 2
        y0 = y1 * np.exp(l1 - l0) + y2 * np.exp(l2 - l0)
        err = max(_tail_estimate(coeffs, z0, -1, J), _tail_estimate(coeffs, z0, +1, J))
    if err > rtol:
        raise AccuracyError(f"starting-data error {err:.1e} at R={R}; raise R")
    y, lg = lax.transport(st, s, z0, x, y0, l0, rtol=min(rtol, 1e-12))
    return y * np.exp(lg), err


def _from_zero(coeffs, x, x1, psi1, rtol):
    # solution recessive at 0 along the real ray through x, carried out to x1
    st, s, K = coeffs.state, coeffs.s, coeffs.K
    e = 1.0 if x > 0 else -1.0
    ev, evec = np.linalg.eig(coeffs.Ak[-1])
    # exp(mu zeta^{1-K}/(1-K)) decays at 0 when Re(mu zeta^{1-K}) > 0
    i = np.argmax((ev * e ** (K - 1)).real)
    r0 = min((abs(ev[i]) / (30 * (K - 1))) ** (1 / (K - 1)), abs(x) / 2)
    ya, la = lax.transport(st, s, r0 * e, x, evec[:, i], 0.0, rtol=min(rtol, 1e-13))
    yb, lb = lax.transport(st, s, x, x1, ya, la, rtol=min(rtol, 1e-13))
    c = (yb.conj() @ psi1) / (yb.conj() @ yb)
    return c * ya * np.exp(la - lb), float(np.linalg.norm(psi1 - c * yb) / np.linalg.norm(psi1))


def psi_solve(coeffs, x, R=None, rtol=1e-11, eps=0.0, J=30):
    """psi(x) for real x != 0.

    ``R`` defaults to ``default_radius(s, x)``; smaller values are refused.
    For x > 0 the path runs from R e^{i eps} straight to x.  Between
    ``match_point(s, x)`` and 0 the recessive-at-0 route is used; its
    misfit at the matching point goes into ``error_estimate``.
    """
    x = float(x)
    if x == 0:
        raise PathError("psi is not evaluated at x = 0")
    Rmin = default_radius(coeffs.s, x)
    if R is None:
        R = Rmin
    if R < Rmin - 1e-12:
        raise ValueError(f"R must be at least {Rmin}")
    x1 = match_point(coeffs.s, x)
    if x1 is None:
        psi, err = _from_infinity(coeffs, x, R, rtol, eps, J)
    elif not np.any(coeffs.Ak):
        # zeta = 0 is a regular point: the first column is entire and recessive
        # to the right, come in from R e^{i eps} around 0
        z0 = R * cmath.exp(1j * eps)
        y0, l0 = lax.formal_column(coeffs.state, coeffs.s, z0, -1, J)
        err = _tail_estimate(coeffs, z0, -1, J)
        y, lg = lax.transport(coeffs.state, coeffs.s, z0, x + 1j, y0, l0, rtol=min(rtol, 1e-12))
        y, lg = lax.transport(coeffs.state, coeffs.s, x + 1j, x, y, lg, rtol=min(rtol, 1e-12))
        psi = y * np.exp(lg)
    else:
        p1, err = _from_infinity(coeffs, x1, R, rtol, eps, J)
        psi, mis = _from_zero(coeffs, x, x1, p1, rtol)
        err = max(err, mis)
    dpsi = lax_matrix(coeffs, x) @ psi
    return PsiVector(x, complex(psi[0]), complex(psi[1]), complex(dpsi[0]), complex(dpsi[1]), err)


def _kernel_from(pu, pv, tol):
    u, v = pu.x, pv.x
    if u == v:
        # limit v -> u of the quotient below
        num = pu.psi1 * pu.dpsi2 - pu.dpsi1 * pu.psi2
        val = num / (2j * math.pi)
    else:
        num = pv.psi1 * pu.psi2 - pu.psi1 * pv.psi2
        val = num / (2j * math.pi * (u - v))
    if abs(val.imag) > tol * (1 + abs(val.real)):
        raise ConsistencyError(f"Im K = {val.imag:.2e} at ({u}, {v})")
    return val.real


def kernel_K_psi(coeffs, u, v, R=None, rtol=1e-11, imag_tol=1e-6):
    """K_Psi(u, v; s, tau).

    For u == v the confluent limit (psi_1 psi_2' - psi_1' psi_2)/(2 pi i)
    is used, with derivatives from the Lax equation.
    """
    pu = psi_solve(coeffs, u, R, rtol)
    pv = pu if u == v else psi_solve(coeffs, v, R, rtol)
    return _kernel_from(pu, pv, imag_tol)


def kernel_matrix(coeffs, xs, R=None, rtol=1e-11, imag_tol=1e-6):
    """[K_Psi(x_i, x_j)] with one psi solve per point."""
    xs = [float(x) for x in xs]
    if R is None:
        R = max(default_radius(coeffs.s, x) for x in xs)
    ps = [psi_solve(coeffs, x, R, rtol) for x in xs]
    n = len(xs)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = _kernel_from(ps[i], ps[j], imag_tol)
    return out


# ---------------------------------------------------------------------------
# Airy reference

_OMEGA = cmath.exp(2j * math.pi / 3)


def _ai(z):
    a, ap, _, _ = airy(z)
    return a, ap


def airy_parametrix(zeta):
    """The Airy model solution Phi_Ai(zeta), continuous up to the rays from the left.

    With a = (Ai, Ai')(zeta), b = e^{i pi/3}(Ai, w^2 Ai')(w^2 zeta) and
    c = w (Ai, w Ai')(w zeta), w = e^{2 pi i/3}, and D = sqrt(2 pi) diag(1, -i):

        Phi = D [a, b]   for 0 < arg zeta < 2pi/3,
        Phi = D [-c, b]  for 2pi/3 < arg zeta < pi,
        Phi = D [b, c]   for -pi < arg zeta < -2pi/3,
        Phi = D [a, c]   for -2pi/3 < arg zeta < 0.

    Jumps: [[1,1],[0,1]] on (0, inf), [[1,0],[1,1]] on arg = +-2pi/3 and
    [[0,1],[-1,0]] on (-inf, 0), rays oriented away from 0 on the
    positive axis and toward 0 otherwise.  On a ray the value from the
    left (+) side is returned.  Phi e^{theta sigma_3} with theta =
    (2/3) zeta^{3/2} tends to zeta^{-sigma_3/4}(I + i sigma_1)/sqrt 2.
    """
    z = complex(zeta)
    if z == 0:
        raise PathError("Phi_Ai is evaluated off zeta = 0")
    arg = cmath.phase(z)
    if arg == -math.pi:
        arg = math.pi
    w, w2 = _OMEGA, _OMEGA ** 2
    a = np.array(_ai(z))
    A2, A2p = _ai(w2 * z)
    b = cmath.exp(1j * math.pi / 3) * np.array([A2, w2 * A2p])
    A1, A1p = _ai(w * z)
    c = w * np.array([A1, w * A1p])
    t = 2 * math.pi / 3
    if 0 <= arg <= t:
        cols = (a, b)
    elif t < arg <= math.pi:
        cols = (-c, b)
    elif -math.pi < arg <= -t:
        cols = (b, c)
    else:
        cols = (a, c)
    M = np.column_stack(cols)
    return math.sqrt(2 * math.pi) * np.diag([1.0, -1j]) @ M


def airy_kernel(x, y):
    """K_Ai(x, y), with the confluent diagonal Ai'(x)^2 - x Ai(x)^2."""
    ax, apx, _, _ = airy(x)
    if x == y:
        return float(apx * apx - x * ax * ax)
    ay, apy, _, _ = airy(y)
    return float((ax * apy - apx * ay) / (x - y))
