"""The coupled Painleve XXXIV system and its pole-free solution.

State variables are ``u_k = b_k``, ``v_k = b_k'`` and ``w_k = (A_k)_{21}``,
k = 1..K with K = 2m+1, and the system is first order:

    u_k' = v_k,
    v_k' = 2 (w_k + Q u_k + u_{k+1}),
    w_k' = Q v_k + v_{k+1},          Q = 2 b_1 + s,  u_{K+1} = v_{K+1} = 0.

The quantities tilde tau_p, p = 2m+2..4m+2, are conserved.

The solution wanted is fixed by b_1 ~ -tau_1/(2 s^{3/2}) at +infinity
together with the monodromy data of the Lax pair.  Large-s asymptotics
determine it only up to 2m+1 exponentially small Airy-squared modes,
which grow like exp((4/3)(s0^{3/2} - s^{3/2})) when integrating down.
``solve_pole_free`` fixes those modes by requiring the Lax-pair frame
normalized at infinity to have the prescribed behaviour at zeta = 0,
then integrates the corrected data down to ``s_min``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.integrate import solve_ivp

from . import lax
from .scaling import TauVector


class IntegrationError(RuntimeError):
    """Step-size underflow or first-integral drift; ``last_s`` is the last good s."""

    def __init__(self, msg, last_s=None):
        super().__init__(msg)
        self.last_s = last_s


class InitializationError(RuntimeError):
    """Asymptotic initial data too inaccurate at the requested s0."""


class MatchingError(RuntimeError):
    """Monodromy conditions could not be met."""


def _tau(tau):
    return tau if isinstance(tau, TauVector) else TauVector(tau)


@dataclass(frozen=True)
class P34State:
    """(u, v, w) at one value of s."""
    s: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def from_vector(cls, s, x):
        u, v, w = lax.split_state(np.asarray(x, float))
        return cls(float(s), u.copy(), v.copy(), w.copy())

    @property
    def vector(self):
        return np.concatenate([self.u, self.v, self.w])

    @property
    def b(self):
        return self.u

    def bpp(self):
        """b_k'' = 2 (w_k + Q u_k + u_{k+1})."""
        Q = 2 * self.u[0] + self.s
        return 2 * (self.w + Q * self.u + np.append(self.u[1:], 0.0))


def tau_tilde(tau):
    """tilde tau_p = sum_k (k-1)(p-k-1) tau_{k-1} tau_{p-k-1}, p = 2m+2..4m+2."""
    tau = _tau(tau)
    m = tau.m
    t = lambda j: tau[j - 1] if 1 <= j <= 2 * m else 0.0
    out = []
    for p in range(2 * m + 2, 4 * m + 3):
        acc = 0.0
        for k in range(p - 2 * m - 1, 2 * m + 2):
            acc += (k - 1) * (p - k - 1) * t(k - 1) * t(p - k - 1)
        out.append(acc)
    return np.array(out)


def rhs(s, x):
    """Right side of the first-order system (a_1 may be appended as a last entry)."""
    K = len(x) // 3
    u, v, w = x[:K], x[K:2 * K], x[2 * K:3 * K]
    Q = 2 * u[0] + s
    un = np.append(u[1:], 0.0)
    vn = np.append(v[1:], 0.0)
    out = np.concatenate([v, 2 * (w + Q * u + un), Q * v + vn])
    if len(x) > 3 * K:
        out = np.append(out, u[0] + s / 2)
    return out


def first_integrals(x, s):
    """The conserved quantities, in the normalization where they equal tilde tau_p."""
    K = len(x) // 3
    m = (K - 1) // 2
    u, v, w = x[:K], x[K:2 * K], x[2 * K:3 * K]
    Q = 2 * u[0] + s
    b = np.append(u, [0.0, 0.0])
    bp = np.append(v, [0.0, 0.0])
    bpp = np.append(2 * (w + Q * u + np.append(u[1:], 0.0)), [0.0, 0.0])
    B = lambda k: b[k - 1] if 1 <= k <= K else 0.0
    Bp = lambda k: bp[k - 1] if 1 <= k <= K else 0.0
    Bpp = lambda k: bpp[k - 1] if 1 <= k <= K else 0.0
    out = []
    for p in range(2 * m + 2, 4 * m + 3):
        acc = 0.0
        for k in range(p - 2 * m - 1, 2 * m + 2):
            acc += (B(p - k) * Bpp(k) - 0.5 * Bp(k) * Bp(p - k)
                    - 2 * Q * B(p - k) * B(k) - 2 * B(p - k) * B(k + 1))
        out.append(-acc / 2)
    return np.array(out)


def first_integral_residual(x, s, tau):
    """Relative residuals |I_p - tilde tau_p| / max(1, |tilde tau_p|)."""
    tt = tau_tilde(tau)
    return np.abs(first_integrals(x, s) - tt) / np.maximum(1.0, np.abs(tt))


# ---------------------------------------------------------------------------
# large-s asymptotics

def _dser(a):
    # d/ds of sum_j a_j s^{-j/2}
    out = np.zeros_like(a)
    j = np.arange(a.shape[-1])
    out[..., 2:] = (-(j / 2) * a)[..., :-2]
    return out


@lru_cache(maxsize=64)
def _series_coeffs(tau, J):
    tau = TauVector(tau)
    m = tau.m
    K = 2 * m + 1
    c = np.zeros((K + 1, J + 1))
    for k in range(1, K):
        c[k, 1] = k * tau[k - 1]
    conv = lambda a, b: np.convolve(a, b)[:len(a)]
    for j in range(2, J + 1):
        b1 = c[0]
        db1 = _dser(b1)
        for k in range(K - 1, -1, -1):
            bk = c[k]
            dbk = _dser(bk)
            d3 = _dser(_dser(dbk))
            rest = 0.25 * d3[j] - 2 * conv(b1, dbk)[j] - conv(db1, bk)[j]
            c[k, j] = (_dser(c[k + 1])[j] - rest) / ((j - 1) / 2)
    return c[:K]


def asymptotic_series(tau, J=80):
    """Coefficients c[k-1, j] of b_k(s) ~ sum_j c_kj s^{-j/2} (divergent).

    Generated by the Lenard recursion b_{k+1}' = (b_k''' - 4Q b_k' - 2Q' b_k)/4
    with b_{K+1} = 0 and the leading terms c_{k,1} = (k-1) tau_{k-1}.
    """
    return _series_coeffs(tuple(_tau(tau).tau), J).copy()


def _truncation(c, s):
    """Index of the smallest term (optimal truncation) at s."""
    y = s ** -0.5
    mag = np.max(np.abs(c), axis=0) * y ** np.arange(c.shape[1])
    mag[mag == 0] = np.inf  # the series skips powers; ignore empty columns
    j0 = 4
    if c.shape[1] <= j0 or not np.isfinite(mag[j0:]).any():
        return c.shape[1] - 1
    return j0 + int(np.argmin(mag[j0:]))


def _state_from(c, s, J):
    y = s ** -0.5
    yj = y ** np.arange(J + 1)
    cc = c[:, :J + 1]
    u = cc @ yj
    v = _dser(c)[:, :J + 1] @ yj
    upp = _dser(_dser(c))[:, :J + 1] @ yj
    w = upp / 2 - (2 * u[0] + s) * u - np.append(u[1:], 0.0)
    return np.concatenate([u, v, w])


def series_state(tau, s, J=None):
    """State vector from the optimally truncated asymptotic series."""
    c = asymptotic_series(tau)
    if J is None:
        J = _truncation(c, s)
    return _state_from(c, s, J)


def leading_state(tau, s):
    """State from the dominant term of each b_k only."""
    c = asymptotic_series(tau, 4)
    lead = np.zeros_like(c)
    for k in range(c.shape[0]):
        j = np.flatnonzero(np.abs(c[k]) > 0)
        if len(j):
            lead[k, j[0]] = c[k, j[0]]
    return _state_from(lead, s, c.shape[1] - 1)


def series_a1(tau, s, J=None):
    """a_1(s) = s^2/4 - int_s^inf b_1 dt from the b_1 series."""
    c = asymptotic_series(tau)
    if J is None:
        J = _truncation(c, s)
    c1 = c[0]
    if abs(c1[2]) > 0:
        raise InitializationError("b_1 series has an s^{-1} term")
    acc = s * s / 4
    for j in range(3, J + 1):
        acc -= c1[j] * s ** (1 - j / 2) / (j / 2 - 1)
    return acc


def asymptotic_init(tau, s0=25.0, order="series", tol=1e-2, auto_raise=True, s0_max=1e4):
    """Initial state at s0 from the large-s asymptotics.

    ``order="leading"`` keeps the dominant balance only, giving
    b_1 = -tau_1/(2 s0^{3/2}), b_k = (k-1) tau_{k-1} s0^{-1/2} for k >= 2
    and v_k, w_k from differentiating that ansatz.  Its first-integral
    residual is O(1/s0) relative.  The default uses the optimally
    truncated series.  If a residual exceeds ``tol * max(1, |tilde tau_p|)``
    s0 is doubled (``auto_raise``) up to ``s0_max``; otherwise
    InitializationError is raised.  The returned state carries the s0 used.
    """
    tau = _tau(tau)
    if order not in ("leading", "series"):
        raise ValueError("order must be 'leading' or 'series'")
    if tau.is_zero():
        return P34State.from_vector(s0, np.zeros(3 * (2 * tau.m + 1)))
    s0 = float(s0)
    while True:
        x = leading_state(tau, s0) if order == "leading" else series_state(tau, s0)
        res = np.max(first_integral_residual(x, s0, tau))
        if res <= tol:
            return P34State.from_vector(s0, x)
        if not auto_raise or 2 * s0 > s0_max:
            raise InitializationError(f"asymptotic residual {res:.2e} at s0={s0}; raise s0")
        s0 *= 2


def project_first_integrals(x, s, tau, iters=4):
    """Minimum-norm correction of x onto the exact first-integral level set."""
    x = np.array(x, float)
    tt = tau_tilde(tau)
    for _ in range(iters):
        r = first_integrals(x, s) - tt
        G = _fi_gradient(x, s)
        x = x - np.linalg.lstsq(G, r, rcond=None)[0]
    return x


def _fi_gradient(x, s):
    h = 1e-7 * max(1.0, np.max(np.abs(x)))
    return np.array([(first_integrals(x + h * e, s) - first_integrals(x - h * e, s)) / (2 * h)
                     for e in np.eye(len(x))]).T


# ---------------------------------------------------------------------------
# trajectories

class PainleveTrajectory:
    """Solution on [s_min, s_max] with dense output.

    Below ``s_join`` values come from the integrated ODE (dense output of
    the integrator); above it from the optimally truncated series.
    ``s_grid`` and ``states`` record the accepted integrator steps.
    """

    def __init__(self, tau, sol, s_min, s_join, s_max, a1_offset=0.0, meta=None):
        self.tau = _tau(tau)
        self.m = self.tau.m
        self.K = 2 * self.m + 1
        self._sol = sol
        self.s_min = float(s_min)
        self.s_join = float(s_join)
        self.s_max = float(s_max)
        self.meta = dict(meta or {})
        self._a1_offset = a1_offset
        if sol is not None:
            order = np.argsort(sol.t)[::-1]
            self.s_grid = sol.t[order]
            self.states = [P34State.from_vector(s, sol.y[:3 * self.K, i])
                           for s, i in zip(sol.t[order], order)]
        else:
            self.s_grid = np.array([])
            self.states = []

    def _check(self, s):
        if not (self.s_min - 1e-12 <= s <= self.s_max + 1e-12):
            raise ValueError(f"s={s} outside [{self.s_min}, {self.s_max}]")

    def vector(self, s, piece=None):
        """(u, v, w) at s.

        ``piece`` ("ode" or "series") forces one representation; the
        ODE piece is then extended a short way past ``s_join`` by its
        dense output.  The two differ at ``s_join`` by the truncation
        error of the series there.
        """
        s = float(s)
        self._check(s)
        if self.tau.is_zero():
            return np.zeros(3 * self.K)
        if piece is None:
            piece = "series" if s > self.s_join or self._sol is None else "ode"
        if piece == "series":
            return series_state(self.tau, s)
        return self._sol.sol(s)[:3 * self.K]

    def state(self, s, piece=None):
        return P34State.from_vector(s, self.vector(s, piece))

    def b(self, s, k=1):
        return self.vector(s)[k - 1]

    def a1(self, s):
        """a_1(s), with a_1' = b_1 + s/2 and a_1 = s^2/4 - int_s^inf b_1."""
        s = float(s)
        self._check(s)
        if self.tau.is_zero():
            return s * s / 4
        if s > self.s_join or self._sol is None:
            return series_a1(self.tau, s)
        return self._sol.sol(s)[3 * self.K] + self._a1_offset

    def first_integral_residual(self, s):
        return first_integral_residual(self.vector(s), float(s), self.tau)

    def lookup_b1(self, s):
        return np.array([self.b(x) for x in np.atleast_1d(s)])


def integrate(init, tau, s_min, rtol=1e-10, drift_tol=1e-6):
    """Plain initial-value integration downward from ``init``.

    Fails with IntegrationError (carrying the last good s) on step
    underflow or if a first-integral residual exceeds ``drift_tol``
    (relative to max(1, |tilde tau_p|)) at an accepted step.
    """
    tau = _tau(tau)
    s0 = init.s
    if not s_min < s0:
        raise ValueError("s_min must lie below init.s")
    x0 = np.append(init.vector, series_a1(tau, s0) if not tau.is_zero() else s0 * s0 / 4)
    sol = solve_ivp(rhs, (s0, s_min), x0, method="DOP853", rtol=rtol,
                    atol=rtol * 1e-3, dense_output=True)
    if sol.status != 0:
        raise IntegrationError(f"integration stopped: {sol.message}", sol.t[-1])
    ref = first_integrals(init.vector, s0)
    tt = tau_tilde(tau)
    scale = np.maximum(1.0, np.abs(tt))
    for i, s in enumerate(sol.t):
        drift = np.abs(first_integrals(sol.y[:-1, i], s) - ref) / scale
        if np.max(drift) > drift_tol:
            raise IntegrationError(f"first-integral drift {np.max(drift):.2e} at s={s}",
                                   sol.t[max(i - 1, 0)])
    return PainleveTrajectory(tau, sol, s_min, s0, s0)


# ---------------------------------------------------------------------------
# monodromy matching

@dataclass
class MatchReport:
    kappa: np.ndarray
    residual: float
    iterations: int
    s0: float
    s_star: float
    stokes_gamma: complex = field(default=0j)


def _frames(x, s, R, rho):
    # columns normalized at infinity: col1 ~ e^{-theta} from zeta = R,
    # col2 ~ e^{+theta} from zeta = iR, both carried to radius rho
    y1, l1 = lax.formal_column(x, s, R, -1)
    c1, l1 = lax.transport(x, s, R, rho, y1, l1)
    y2, l2 = lax.formal_column(x, s, 1j * R, +1)
    c2, l2 = lax.transport(x, s, 1j * R, 1j * rho, y2, l2)
    return c1, l1, c2, l2


def monodromy_residuals(x, s, tau, R=45.0, rho=1.0):
    """Conditions at zeta = 0 on the frame normalized at infinity.

    For odd j, column 2 continued to arg zeta = j pi/(2m) must be the
    solution recessive at 0 along that ray (m complex conditions).  The
    combination c2 + gamma c1 recessive along arg = -pi/(2m) must have
    gamma = -1, since the second column in the sector below the positive
    axis is c2 - c1.  Returns (array of normalized Wronskians, gamma).
    """
    tau = _tau(tau)
    m = tau.m
    c1, l1, c2, l2 = _frames(x, s, R, rho)
    out = []
    for j in range(1, 2 * m, 2):
        alpha = j * math.pi / (2 * m)
        col = c2 if j == m else lax.arc(x, s, c2, rho, math.pi / 2, alpha)
        r = lax.recessive_at_zero(x, s, tau.tau, alpha, rho)
        out.append(lax.nwronskian(col, r))
    beta = -math.pi / (2 * m)
    a1 = lax.arc(x, s, c1, rho, 0.0, beta)
    a2 = lax.arc(x, s, c2, rho, math.pi / 2, beta)
    r = lax.recessive_at_zero(x, s, tau.tau, beta, rho)
    gamma = -lax.wronskian(a2, r) / lax.wronskian(a1, r) * np.exp(l2 - l1)
    return np.array(out), complex(gamma)


def _flow(x0, s0, s1, rtol):
    sol = solve_ivp(rhs, (s0, s1), x0, method="DOP853", rtol=rtol, atol=rtol * 1e-2)
    if sol.status != 0:
        raise IntegrationError(sol.message, sol.t[-1])
    return sol.y[:, -1]


def match_monodromy(tau, s0=6.0, s_star=3.0, rtol=1e-13, tol=1e-11, maxiter=12, R=45.0):
    """Initial state at s0 with the Airy-squared modes fixed by the monodromy.

    Returns ``(x0, report)``.  The 2m+1 amplified directions of the flow
    map s0 -> s_star (leading right singular vectors, scaled by their
    singular values) are adjusted by Gauss-Newton so that the
    conditions of ``monodromy_residuals`` hold at s_star.  Rows are
    scaled by their Jacobian norms; the Stokes ratio gamma is very
    sensitive to the state (a 1e-10 change at s0 moves it by O(100)),
    so ``report.stokes_gamma`` is only a rough diagnostic.
    """
    tau = _tau(tau)
    K = 2 * tau.m + 1
    x_base = project_first_integrals(series_state(tau, s0), s0, tau)
    base = _flow(x_base, s0, s_star, rtol)
    h = 1e-9
    Jf = np.array([(_flow(x_base + h * e, s0, s_star, rtol) - base) / h
                   for e in np.eye(3 * K)]).T
    _, S, Vt = np.linalg.svd(Jf)
    D = Vt[:K].T / S[:K]
    # keep the corrections on the first-integral level set
    G = _fi_gradient(x_base, s0)
    D = D - np.linalg.pinv(G) @ (G @ D)

    def F(kap):
        xs = _flow(x_base + D @ kap, s0, s_star, rtol)
        w, g = monodromy_residuals(xs, s_star, tau, R=R)
        return np.concatenate([w.real, w.imag, [g.real + 1, g.imag]]), g

    kap = np.zeros(K)
    f, g = F(kap)
    scale = None
    it = 0
    for it in range(1, maxiter + 1):
        J = np.array([(F(kap + 1e-6 * e)[0] - f) / 1e-6 for e in np.eye(K)]).T
        if scale is None:
            scale = 1 / np.maximum(np.linalg.norm(J, axis=1), 1e-300)
        step = np.linalg.lstsq(scale[:, None] * J, -scale * f, rcond=None)[0]
        lam = 1.0
        while lam > 1e-4:
            try:
                fn, gn = F(kap + lam * step)
            except (IntegrationError, lax.PathError):
                lam /= 2  # trial step ran into a pole
                continue
            if np.linalg.norm(scale * fn) < np.linalg.norm(scale * f):
                break
            lam /= 2
        else:
            break
        done = np.linalg.norm(scale * (f - fn)) < tol
        kap, f, g = kap + lam * step, fn, gn
        if done or np.linalg.norm(scale * f) < tol:
            break
    res = float(np.linalg.norm(scale * f))
    if res > 1e-6:
        raise MatchingError(f"monodromy residual {res:.2e} after {it} iterations")
    x0 = project_first_integrals(x_base + D @ kap, s0, tau, iters=2)
    return x0, MatchReport(kap, res, it, s0, s_star, g)


@lru_cache(maxsize=32)
def _solve_cached(tau, s_min, s_max, s0, s_star, rtol):
    tau = TauVector(tau)
    K = 2 * tau.m + 1
    if tau.is_zero():
        return PainleveTrajectory(tau, None, s_min, s_max, s_max)
    x0, rep = match_monodromy(tau, s0, s_star)
    a10 = series_a1(tau, s0)
    sol = solve_ivp(rhs, (s0, s_min), np.append(x0, a10), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-3, dense_output=True)
    if sol.status != 0:
        raise IntegrationError(f"integration stopped: {sol.message}", sol.t[-1])
    meta = {"kappa": rep.kappa.tolist(), "match_residual": rep.residual,
            "stokes_gamma": rep.stokes_gamma, "s0": s0, "s_star": s_star}
    return PainleveTrajectory(tau, sol, s_min, s0, max(s_max, s0), meta=meta)


def solve_pole_free(tau, s_min=-4.0, s_max=30.0, s0=6.0, s_star=3.0, rtol=1e-13):
    """The pole-free solution with b_1 ~ -tau_1/(2 s^{3/2}) on [s_min, s_max].

    Series for s > s0, monodromy-matched ODE solution below.  The
    downward flow keeps amplifying the Airy-squared modes until s ~ 0,
    so the attainable accuracy degrades with decreasing s (about 1e-8
    at s_star, 1e-5 at s = 0 and 1e-2 at s = -2 in double precision).
    First-integral and Lenard residuals are unaffected.
    """
    tau = _tau(tau)
    return _solve_cached(tuple(tau.tau), float(s_min), float(s_max), float(s0),
                         float(s_star), float(rtol))


# ---------------------------------------------------------------------------
# derived quantities

def lenard_residual(traj, s, h=5e-3):
    """Residuals b_{k+1}' - (b_k''' - 4Q b_k' - 2Q' b_k)/4, k = 1..K.

    b_k''' is a fourth-order central difference of b_k''; the whole
    stencil is taken from the piece (ODE or series) containing s.
    """
    K = traj.K
    piece = "series" if s > traj.s_join or traj._sol is None else "ode"
    x = traj.vector(s, piece)
    u, v, w = lax.split_state(x)
    Q = 2 * u[0] + s
    dQ = 2 * v[0] + 1

    def bpp(t):
        return traj.state(t, piece).bpp()

    if s + 2 * h > traj.s_max or s - 2 * h < traj.s_min:
        raise ValueError("s too close to the trajectory ends")
    b3 = (-bpp(s + 2 * h) + 8 * bpp(s + h) - 8 * bpp(s - h) + bpp(s - 2 * h)) / (12 * h)
    vn = np.append(v[1:], 0.0)
    return vn - (b3 - 4 * Q * v - 2 * dQ * u) / 4


def partition_integral(traj, s, T=None, panels=64, order=16):
    """I(s) = int_s^inf (b_1(t)(t-s) + tau_1/(2 sqrt(t-s))) dt.

    With t = s + u^2 the integrand becomes 2u^3 b_1(s+u^2) + tau_1 on
    [0, sqrt(T-s)] (composite Gauss-Legendre); the tail beyond T uses
    the b_1 series termwise, the s^{-3/2} term combined with the
    counterterm in closed form.
    """
    tau = traj.tau
    if tau.is_zero():
        return 0.0
    if s < traj.s_min:
        raise ValueError("s below trajectory range")
    tau1 = tau[0]
    if T is None:
        T = max(traj.s_join, s)
    U = math.sqrt(T - s)
    acc = 0.0
    if U > 0:
        xg, wg = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, U, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            uu = 0.5 * (b - a) * xg + 0.5 * (a + b)
            vals = np.array([2 * q ** 3 * traj.b(s + q * q) + tau1 for q in uu])
            acc += 0.5 * (b - a) * (wg @ vals)
    c1 = asymptotic_series(tau)[0]
    J = _truncation(asymptotic_series(tau), T)
    if abs(c1[2]) > 0 or abs(c1[4]) > 1e-14 * max(1.0, abs(c1[3])):
        raise ValueError("unexpected s^{-1} or s^{-2} term in the b_1 series")
    tail = tau1 * (math.sqrt(T) - math.sqrt(T - s)) + tau1 * s / math.sqrt(T)
    for j in range(5, J + 1):
        tail += c1[j] * (T ** (2 - j / 2) / (j / 2 - 2) - s * T ** (1 - j / 2) / (j / 2 - 1))
    return acc + tail
