"""The zeta-equation of the Lax pair, dPsi/dzeta = A(zeta; s) Psi.

With the P34 state ``x = (u_1..u_K, v_1..v_K, w_1..w_K)``, K = 2m+1,

    A(zeta) = A_0 + sum_k A_k zeta^{-k} + zeta sigma_-,
    A_0 = [[0, 1], [b_1 + s, 0]],   A_k = [[v_k/2, -u_k], [w_k, -v_k/2]].

This module holds the matrix itself, the formal solution at infinity
normalized as zeta^{-sigma_3/4} (I + i sigma_1)/sqrt(2) e^{-theta sigma_3}
(with the e^{-i pi sigma_3/4} phase), rescaled transport of vectors
along straight segments and arcs, and the solutions recessive at zeta = 0.
"""
import cmath

import numpy as np
from scipy.integrate import solve_ivp


class PathError(ValueError):
    """Integration path too close to the essential singularity at 0."""


def split_state(x):
    K = len(x) // 3
    return x[:K], x[K:2 * K], x[2 * K:]


def lax_coefficients(x, s):
    """A_0 and the stack A_1..A_K (shape (K, 2, 2)) for state x at s."""
    u, v, w = split_state(np.asarray(x, float))
    A0 = np.array([[0.0, 1.0], [u[0] + s, 0.0]])
    Ak = np.empty((len(u), 2, 2))
    Ak[:, 0, 0] = v / 2
    Ak[:, 0, 1] = -u
    Ak[:, 1, 0] = w
    Ak[:, 1, 1] = -v / 2
    return A0, Ak


def lax_matrix(x, s, zeta):
    """A(zeta; s) as a 2x2 complex array."""
    z = complex(zeta)
    if z == 0:
        raise PathError("A is singular at zeta = 0")
    u, v, w = split_state(x)
    pw = (1 / z) ** np.arange(1, len(u) + 1)
    a11 = (v / 2) @ pw
    return np.array([[a11, 1 - u @ pw], [z + u[0] + s + w @ pw, -a11]])


def _tmul(a, b, N):
    # product of truncated series stored with offset 2 (index i <-> power i-2)
    return np.convolve(a, b)[2:2 + N]


def formal_exponent(x, s, sign, J=30):
    """Coefficients sigma_{-1}..sigma_J of S = phi'/phi in t = zeta^{-1/2}.

    ``phi`` is the first entry of a formal solution at infinity;
    ``sign = -1`` gives the column ~ e^{-theta}, ``+1`` the column ~ e^{+theta}.
    S solves the Riccati equation obtained by eliminating the second entry.
    """
    u, v, w = split_state(x)
    K = len(u)
    N = J + 2 * K + 8
    off = 2

    def zpow(k):  # zeta^{-k} = t^{2k}
        a = np.zeros(N)
        if 0 <= 2 * k + off < N:
            a[2 * k + off] = 1.0
        return a

    a11 = sum(v[k - 1] / 2 * zpow(k) for k in range(1, K + 1))
    a12 = zpow(0) - sum(u[k - 1] * zpow(k) for k in range(1, K + 1))
    a21 = zpow(-1) + (u[0] + s) * zpow(0) + sum(w[k - 1] * zpow(k) for k in range(1, K + 1))

    def dz(a):  # d/dzeta = -(t^3/2) d/dt, power p -> -(p/2) t^{p+2}
        out = np.zeros(N)
        p = np.arange(N) - off
        out[2:] = (-(p / 2) * a)[:N - 2]
        return out

    detA = -_tmul(a11, a11, N) - _tmul(a12, a21, N)
    G = _tmul(a12, detA, N) - _tmul(a12, dz(a11), N) + _tmul(a11, dz(a12), N)
    Sx = np.zeros(N)
    Sx[off - 1] = sign
    da12 = dz(a12)
    for j in range(J + 1):
        F = _tmul(a12, dz(Sx) + _tmul(Sx, Sx, N), N) - _tmul(da12, Sx, N) + G
        Sx[j + off] = -F[j - 1 + off] / (2 * sign)
    return Sx[off - 1:off + J + 1]


def formal_column(x, s, zeta, sign, J=30):
    """Formal solution column at large zeta.

    Returns ``(vec, logscale)``: the true column is ``vec * exp(logscale)``.
    Normalization matches zeta^{-sigma_3/4}(I + i sigma_1)/sqrt(2) e^{-theta sigma_3}
    with the e^{-i pi sigma_3/4} phase and unit lower-triangular prefactor.
    """
    sig = formal_exponent(x, s, sign, J)
    z = complex(zeta)
    sq = cmath.sqrt(z)
    t = 1 / sq
    lg = sig[0] * (2 / 3) * z * sq + sig[1] * z + 2 * sig[2] * sq + sig[3] * cmath.log(z)
    for j in range(3, J + 1):
        lg += sig[j + 1] * t ** (j - 2) / (1 - j / 2)
    S = sum(sig[j + 1] * t ** j for j in range(-1, J + 1))
    A = lax_matrix(x, s, z)
    chi = (S - A[0, 0]) / A[0, 1]
    phase = cmath.exp(-0.25j * cmath.pi) if sign < 0 else cmath.exp(0.25j * cmath.pi)
    return np.array([1.0, chi]) * phase / np.sqrt(2), lg


def transport(x, s, z0, z1, y0, logscale=0.0, rtol=1e-12, nseg=None, clearance=1e-3):
    """Carry a solution vector along the segment z0 -> z1.

    The vector is renormalized between sub-segments; the returned pair
    ``(y, logscale)`` represents ``y * exp(logscale)``.
    """
    z0, z1 = complex(z0), complex(z1)
    dz = z1 - z0
    # distance of the segment to the origin
    tt = min(max(-(z0 * dz.conjugate()).real / abs(dz) ** 2, 0.0), 1.0) if dz != 0 else 0.0
    if abs(z0 + tt * dz) < clearance:
        raise PathError("path passes too close to zeta = 0")
    if nseg is None:
        nseg = max(1, int(abs(dz) // 5) + 1)
    y = np.asarray(y0, complex)
    lg = complex(logscale)
    for i in range(nseg):
        a = z0 + dz * i / nseg
        h = dz / nseg

        def f(r, yy):
            return h * (lax_matrix(x, s, a + r * h) @ yy)

        y = solve_ivp(f, (0.0, 1.0), y, method="DOP853", rtol=rtol, atol=1e-300).y[:, -1]
        nrm = np.linalg.norm(y)
        y = y / nrm
        lg += np.log(nrm)
    return y, lg


def arc(x, s, y0, rho, a0, a1, rtol=1e-12, dense=False):
    """Carry a vector along |zeta| = rho from angle a0 to a1."""
    def f(th, yy):
        z = rho * cmath.exp(1j * th)
        return 1j * z * (lax_matrix(x, s, z) @ yy)

    sol = solve_ivp(f, (a0, a1), np.asarray(y0, complex), method="DOP853",
                    rtol=rtol, atol=1e-300, dense_output=dense)
    return sol.sol if dense else sol.y[:, -1]


def recessive_at_zero(x, s, tau, alpha, rho, r0=None):
    """Solution recessive as zeta -> 0 along arg zeta = alpha, carried to radius rho.

    Near 0 the formal solutions behave like exp(+-Lambda) with
    Lambda = sum tau_k zeta^{-k}; along the ray the recessive one is
    started at radius r0 on the matching eigenvector of A_K and carried
    outward (where it dominates).
    """
    tau = np.asarray(tau, float)
    m = len(tau) // 2
    u, v, w = split_state(x)
    AK = np.array([[v[-1] / 2, -u[-1]], [w[-1], -v[-1] / 2]])
    ev, evec = np.linalg.eig(AK)
    if r0 is None:
        r0 = (tau[-1] / 30) ** (1 / (2 * m))
    e = cmath.exp(1j * alpha)
    # exp(-Lambda) decays where Re zeta^{-2m} > 0
    want = 2 * m * tau[-1] if np.cos(2 * m * alpha) > 0 else -2 * m * tau[-1]
    y0 = evec[:, np.argmin(abs(ev - want))]
    y, _ = transport(x, s, r0 * e, rho * e, y0, nseg=1)
    return y


def wronskian(a, b):
    return a[0] * b[1] - a[1] * b[0]


def nwronskian(a, b):
    """Wronskian of unit-normalized vectors (0 when a and b are parallel)."""
    return wronskian(a, b) / np.linalg.norm(a) / np.linalg.norm(b)
