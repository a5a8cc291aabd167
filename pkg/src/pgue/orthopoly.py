"""Orthogonal polynomials for the weight exp(-n V) at configurable precision.

The recurrence is produced by a discretized Stieltjes procedure in
normalized (Lanczos) form on a composite Gauss-Legendre grid.  With
``q_k = sqrt(W_i w(x_i)) p_k(x_i)`` (``p_k`` orthonormal):

    alpha_k   = sum_i x_i q_k^2
    r         = (x - alpha_k) q_k - sqrt(beta_k) q_{k-1}
    beta_{k+1} = sum_i r^2,    q_{k+1} = r / sqrt(beta_{k+1})

so that ``x pi_k = pi_{k+1} + alpha_k pi_k + beta_k pi_{k-1}`` for the
monic ``pi_k`` and ``gamma_k^{-2} = mu_0 beta_1 ... beta_k``.

The grid is laid out in the local coordinate ``y = x - lam``; shifting
``lam`` moves all nodes rigidly, which keeps finite differences in
``lam`` smooth.
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache
import math

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpfr

from .scaling import (DEFAULT_PREC, DomainError, EnsembleSpec, f_map, phi,
                      precision, t_from_tau)


class PrecisionError(ArithmeticError):
    """Loss of positivity or orthogonality; raise precision or refine."""


class ResourceError(RuntimeError):
    """Tolerance not reachable within the node budget."""


def _to_mpfr(x):
    # exact conversion of an mpmath mpf
    sign, man, exp, _ = x._mpf_
    v = gmpy2.mul_2exp(mpfr(int(man)), exp)
    return -v if sign else v


@lru_cache(maxsize=None)
def gauss_legendre(level, prec):
    """Gauss-Legendre rule on [-1, 1] with 3*2**(level-1) points."""
    ctx = mpmath.MPContext()
    ctx.prec = prec + 20
    rule = mpmath.calculus.quadrature.GaussLegendre(ctx)
    pts = rule.calc_nodes(level, ctx.prec)
    with precision(prec + 20):
        x = [_to_mpfr(a) for a, _ in pts]
        w = [_to_mpfr(b) for _, b in pts]
    order = sorted(range(len(x)), key=lambda i: x[i])
    with precision(prec):
        return (tuple(mpfr(x[i]) for i in order),
                tuple(mpfr(w[i]) for i in order))


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite rule in local coordinates ``y = x - lam``.

    ``panels`` lists (a, b) in y; ``nodes`` are the absolute x positions
    for the grid's ``lam``; ``w`` holds the weight function at the nodes.
    """
    lam: object
    y: np.ndarray
    weights: np.ndarray
    panels: tuple
    truncation: float
    prec: int
    nodes: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.y)


def _digits(prec):
    return prec * math.log10(2)


def x_max(n, prec):
    """Truncation point: exp(-2 n phi(X)) far below 2^{-prec}.

    Orthonormal functions of degree <= n beyond the edge decay like
    exp(-n phi(x)), so products decay like exp(-2 n phi(x)).
    """
    target = (1.1 * _digits(prec) * math.log(10) + 40) / (2 * max(n, 1))
    lo, hi = 1.0 + 1e-12, 2.0
    while phi(hi) < target:
        hi *= 2
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if phi(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


def _cut_radius(spec):
    """|y| below which the essential zero makes w negligible (both sides)."""
    D = (_digits(spec.prec) + 20) * math.log(10)
    t = [float(x) for x in spec.t]
    m2 = len(t)
    r = (spec.n * t[-1] / D) ** (1.0 / m2)
    # halve until the full potential term exceeds D on both sides
    for _ in range(200):
        ok = True
        for y in (r, -r):
            pert = sum(t[k] * y ** (-(k + 1)) for k in range(m2))
            if spec.n * pert < D:
                ok = False
        if ok:
            return r
        r *= 0.5
    raise ResourceError("could not locate the essential zero region")


def build_grid(spec, tol=None, panel_level=5, width=None, refine=1):
    """Composite Gauss-Legendre grid for the weight of ``spec``.

    Uniform panels of width ``min(1/4, 6/n)`` (divided by ``refine``) on
    [-X, X], split at ``lam`` with panels graded geometrically (ratio 1/2)
    toward ``lam`` down to the radius where w < 10^-(digits+20); the
    weight is treated as 0 inside.  ``tol`` is accepted for interface
    compatibility; the layout targets the working precision.
    """
    prec = spec.prec
    n = spec.n
    X = x_max(n, prec)
    H = (width if width is not None else min(0.25, 6.0 / n)) / refine
    lam = float(spec.lam)
    gx, gw = gauss_legendre(panel_level, prec)

    def uniform(a, b):
        k = max(1, int(math.ceil((b - a) / H)))
        e = np.linspace(a, b, k + 1)
        return list(zip(e[:-1], e[1:]))

    panels = []
    if spec.trivial or lam <= -X or lam >= X:
        panels = uniform(-X - lam, X - lam)
    else:
        rc = _cut_radius(spec)
        L = min(H, 0.5 * (X - abs(lam)) if abs(lam) < X else H)
        L = max(L, 4 * rc)
        grade = []
        e = L
        while e > rc:
            grade.append((e / 2, e))
            e /= 2
        grade = grade[::-1]
        if refine > 1:
            grade = [(a + (b - a) * i / refine, a + (b - a) * (i + 1) / refine)
                     for a, b in grade for i in range(refine)]
        left_end = -X - lam
        right_end = X - lam
        panels = uniform(left_end, -L) + [(-b, -a) for a, b in grade[::-1]] \
            + grade + uniform(L, right_end)
    with precision(prec):
        ys, ws = [], []
        for a, b in panels:
            a = mpfr(a)
            b = mpfr(b)
            h = (b - a) / 2
            c = (a + b) / 2
            for xi, wi in zip(gx, gw):
                ys.append(c + h * xi)
                ws.append(h * wi)
        y = np.array(ys, dtype=object)
        W = np.array(ws, dtype=object)
        nodes = y + spec.lam
    return QuadratureGrid(spec.lam, y, W, tuple(panels), X, prec, nodes)


def shift_grid(grid, lam):
    """Same local layout, pole moved to ``lam``."""
    with precision(grid.prec):
        lam = mpfr(lam)
        return replace(grid, lam=lam, nodes=grid.y + lam)


def weight_on_grid(spec, grid):
    """w at the grid nodes (spec.lam must equal grid.lam)."""
    with precision(spec.prec):
        y = grid.y
        V = 2 * grid.nodes * grid.nodes
        if not spec.trivial:
            r = np.array([1 / v for v in y], dtype=object)
            p = r
            for tk in spec.t:
                V = V + tk * p
                p = p * r
        return np.array([gmpy2.exp(-spec.n * v) for v in V], dtype=object)


@dataclass(frozen=True)
class RecurrenceTable:
    """Recurrence data of the monic orthogonal polynomials up to degree N.

    ``alpha[k]`` for k = 0..N-1, ``beta[k]`` for k = 0..N with
    ``beta[0] = mu_0``; ``gamma[k]`` (k = 0..N) are the leading
    coefficients of the orthonormal polynomials, ``p1[k]`` the
    sub-leading coefficients of pi_k (p1[0] = 0).
    """
    spec: EnsembleSpec
    N: int
    alpha: tuple
    beta: tuple
    gamma: tuple
    p1: tuple
    log_gamma: tuple
    grid: QuadratureGrid = field(repr=False)
    sqrt_ww: np.ndarray = field(repr=False)
    q_top: tuple = field(repr=False)

    @property
    def mu0(self):
        return self.beta[0]


def stieltjes(spec, N, grid=None):
    """Recurrence coefficients up to degree N by the discretized Stieltjes method."""
    if grid is None:
        grid = build_grid(spec)
    if N > len(grid) // 4:
        raise DomainError("degree too large for the grid")
    with precision(spec.prec):
        w = weight_on_grid(spec, grid)
        ww = grid.weights * w
        mu0 = ww.sum()
        sq = np.array([gmpy2.sqrt(v) for v in ww], dtype=object)
        x = grid.nodes
        q_prev = np.zeros(len(x), dtype=object) * mpfr(0)
        q = sq / gmpy2.sqrt(mu0)
        alpha, beta = [], [mu0]
        sb = mpfr(0)
        for k in range(N):
            a = np.dot(x * q, q)
            r = (x - a) * q - sb * q_prev
            # one pass of re-orthogonalization against q_k, q_{k-1}
            r = r - np.dot(r, q) * q
            b = np.dot(r, r)
            if not b > 0:
                raise PrecisionError(f"beta_{k + 1} <= 0")
            alpha.append(a)
            beta.append(b)
            sb = gmpy2.sqrt(b)
            q_prev, q = q, r / sb
        lg = [-(gmpy2.log(mu0)) / 2]
        for k in range(1, N + 1):
            lg.append(lg[-1] - gmpy2.log(beta[k]) / 2)
        gamma = tuple(gmpy2.exp(v) for v in lg)
        p1 = [mpfr(0)]
        for k in range(N):
            p1.append(p1[-1] - alpha[k])
    return RecurrenceTable(spec, N, tuple(alpha), tuple(beta), gamma,
                           tuple(p1), tuple(lg), grid, sq, (q_prev, q))


def orthonormal_values(table, x, deriv=False):
    """p_0(x), ..., p_N(x) (and derivatives) from the recurrence."""
    with precision(table.spec.prec):
        x = mpfr(x)
        p = [1 / gmpy2.sqrt(table.beta[0])]
        dp = [mpfr(0)]
        pm, dpm = mpfr(0), mpfr(0)
        for k in range(table.N):
            sbk = gmpy2.sqrt(table.beta[k]) if k > 0 else mpfr(0)
            sb1 = gmpy2.sqrt(table.beta[k + 1])
            nxt = ((x - table.alpha[k]) * p[-1] - sbk * pm) / sb1
            dnxt = (p[-1] + (x - table.alpha[k]) * dp[-1] - sbk * dpm) / sb1
            pm, dpm = p[-1], dp[-1]
            p.append(nxt)
            dp.append(dnxt)
    return (p, dp) if deriv else p


def monic_values(table, x):
    """pi_0(x), ..., pi_N(x)."""
    p = orthonormal_values(table, x)
    with precision(table.spec.prec):
        return [pk / g for pk, g in zip(p, table.gamma)]


def cd_kernel(table, x, y, n=None):
    """Christoffel-Darboux kernel K_n(x, y) of the n-point process."""
    spec = table.spec
    n = spec.n if n is None else n
    if n > table.N:
        raise DomainError("n exceeds the table degree")
    from .scaling import weight_w
    with precision(spec.prec):
        x = mpfr(x)
        y = mpfr(y)
        wx, wy = weight_w(spec, x), weight_w(spec, y)
        if wx == 0 or wy == 0:
            return mpfr(0)
        sbn = gmpy2.sqrt(table.beta[n])
        if x == y:
            p, dp = orthonormal_values(table, x, deriv=True)
            return wx * sbn * (dp[n] * p[n - 1] - dp[n - 1] * p[n])
        px = orthonormal_values(table, x)
        py = orthonormal_values(table, y)
        num = px[n] * py[n - 1] - px[n - 1] * py[n]
        return gmpy2.sqrt(wx * wy) * sbn * num / (x - y)


def partition_Zn(table, n=None):
    """ln Z_n = ln n! - 2 sum_{k<n} ln gamma_k."""
    n = table.spec.n if n is None else n
    with precision(table.spec.prec):
        return gmpy2.lgamma(mpfr(n + 1))[0] - 2 * sum(table.log_gamma[:n])


def zn_gue(n, prec=DEFAULT_PREC):
    """ln Z_n^GUE = (n/2) ln 2pi - (n^2/2) ln 4n + sum_{j<=n} ln j!."""
    with precision(prec):
        pi = gmpy2.const_pi()
        acc = mpfr(n) / 2 * gmpy2.log(2 * pi) - mpfr(n) ** 2 / 2 * gmpy2.log(mpfr(4 * n))
        for j in range(1, n + 1):
            acc += gmpy2.lgamma(mpfr(j + 1))[0]
        return acc


def dlogZ_dlambda(spec, table):
    """Right side 4 n p1(n) of the first differential identity."""
    with precision(spec.prec):
        return 4 * spec.n * table.p1[spec.n]


def fd_step(prec):
    """Finite-difference step 2^{-prec/3} for lambda derivatives."""
    return gmpy2.mul_2exp(mpfr(1, prec), -int(prec // 3))


def recurrence_at(spec, grid, N=None):
    """Stieltjes on ``grid`` shifted to ``spec.lam``."""
    N = spec.n if N is None else N
    return stieltjes(spec, N, shift_grid(grid, spec.lam))


def log_Zn_at(spec, grid, lam):
    s2 = spec.with_lambda(lam)
    return partition_Zn(recurrence_at(s2, grid, spec.n))


@dataclass(frozen=True)
class YEdgeData:
    """Y_+(lam) and H(lam) = Y_+(lam) exp(-n lam^2 sigma_3).

    Matrices are stored in the real gauge D Y D^{-1}, D = diag(1, 1/(2 pi i)),
    which leaves det Y, det H and det(H' H^{-1}) unchanged.
    """
    lam: object
    Yval: tuple
    H: tuple
    dH: tuple
    Y1_12_21: object


def _y_matrix(spec, table):
    n = spec.n
    with precision(spec.prec):
        lam = spec.lam
        pi_vals = monic_values(table, lam)
        y = table.grid.y
        q_nm1, q_n = table.q_top
        # Cauchy integrals int pi_k w / (x - lam): w vanishes at lam
        Cn = np.dot(table.sqrt_ww, q_n / y) / table.gamma[n]
        Cn1 = np.dot(table.sqrt_ww, q_nm1 / y) / table.gamma[n - 1]
        g2 = table.gamma[n - 1] ** 2
        return ((pi_vals[n], Cn), (-g2 * pi_vals[n - 1], -g2 * Cn1))


def _h_matrix(spec, Y):
    with precision(spec.prec):
        e = gmpy2.exp(-spec.n * spec.lam ** 2)
        return ((Y[0][0] * e, Y[0][1] / e), (Y[1][0] * e, Y[1][1] / e))


def y_edge(spec, table=None, grid=None, h=None):
    """Y_+(lam), H(lam) and a central difference dH/dlam at fixed t."""
    n = spec.n
    grid = table.grid if table is not None else (grid or build_grid(spec))
    if table is None:
        table = stieltjes(spec, n, grid)
    if table.N != n:
        raise DomainError("y_edge needs a table of degree exactly n")
    h = fd_step(spec.prec) if h is None else h
    Y = _y_matrix(spec, table)
    H = _h_matrix(spec, Y)
    with precision(spec.prec):
        Hs = []
        for sgn in (1, -1):
            s2 = spec.with_lambda(spec.lam + sgn * h)
            t2 = recurrence_at(s2, grid)
            Hs.append(_h_matrix(s2, _y_matrix(s2, t2)))
        dH = tuple(tuple((Hs[0][i][j] - Hs[1][i][j]) / (2 * h) for j in range(2))
                   for i in range(2))
        # (Y_1)_12 (Y_1)_21 from the moment int pi_n x^n w
        xn = np.array([v ** n for v in table.grid.nodes], dtype=object)
        mom = np.dot(table.sqrt_ww, table.q_top[1] * xn) / table.gamma[n]
        y1prod = table.gamma[n - 1] ** 2 * mom
    return YEdgeData(spec.lam, Y, H, dH, y1prod)


def det2(M):
    return M[0][0] * M[1][1] - M[0][1] * M[1][0]


def identity2_rhs(spec, ydata):
    """4 n^2 (lam^2 - 1) + det(H' H^{-1})."""
    with precision(spec.prec):
        dH, H = ydata.dH, ydata.H
        return 4 * spec.n ** 2 * (spec.lam ** 2 - 1) + det2(dH) / det2(H)


def d2logZ_closed(spec, table):
    """16 n^2 beta_n - 4 n^2, the closed form of the second identity."""
    with precision(spec.prec):
        return 16 * spec.n ** 2 * table.beta[spec.n] - 4 * spec.n ** 2


def fd_dlogZ(spec, grid, h=None):
    """Central difference of ln Z_n in lam at fixed t."""
    h = fd_step(spec.prec) if h is None else h
    with precision(spec.prec):
        a = log_Zn_at(spec, grid, spec.lam + h)
        b = log_Zn_at(spec, grid, spec.lam - h)
        return (a - b) / (2 * h)


def fd_d2logZ(spec, grid, h=None):
    """Five-point second difference of ln Z_n in lam at fixed t."""
    h = fd_step(spec.prec) if h is None else h
    with precision(spec.prec):
        v = [log_Zn_at(spec, grid, spec.lam + k * h) for k in (-2, -1, 0, 1, 2)]
        return (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h)


def b1_oracle(n, lam, tau, prec=DEFAULT_PREC, window=(-3.0, 1.0)):
    """Finite-n estimate of b_1 from the second lambda-derivative of ln Z_n.

    Returns ``(b1_est, s_loc)`` with ``s_loc = n^{2/3} f(lam)`` and
    ``b1_est = -[d^2 ln Z_n / d lam^2] / (n^{2/3} f'(lam))^2``; the second
    derivative is a central difference of 4 n p1(n) at fixed t.
    ``window`` bounds (lam - 1) n^{2/3} below and (lam - 1) n^{1/3} above
    (``None`` disables the check).
    """
    with precision(prec):
        lam = mpfr(lam)
        n23 = gmpy2.cbrt(mpfr(n)) ** 2
        if window is not None and not (window[0] < (lam - 1) * n23
                                       and (lam - 1) * gmpy2.cbrt(mpfr(n)) < window[1]):
            raise DomainError("lam outside the scaling window")
        spec = EnsembleSpec(n, lam, t_from_tau(n, lam, tau, prec), prec)
        grid = build_grid(spec)
        h = fd_step(prec)
        d = []
        for sgn in (1, -1):
            s2 = spec.with_lambda(lam + sgn * h)
            d.append(dlogZ_dlambda(s2, recurrence_at(s2, grid)))
        d2 = (d[0] - d[1]) / (2 * h)
        fp = f_map(lam, prec, deriv=1)
        b1 = -d2 / (n23 * fp) ** 2
        return b1, n23 * f_map(lam, prec)


def orthogonality_residual(table, jmax, grid=None):
    """max |<p_j, p_k> - delta_jk| for j, k <= jmax on ``grid`` (default refined)."""
    spec = table.spec
    if grid is None:
        grid = build_grid(spec, refine=2)
    grid = shift_grid(grid, spec.lam)
    with precision(spec.prec):
        w = weight_on_grid(spec, grid)
        sq = np.array([gmpy2.sqrt(v) for v in grid.weights * w], dtype=object)
        x = grid.nodes
        Q = [sq / gmpy2.sqrt(table.beta[0])]
        qm = np.zeros(len(x), dtype=object) * mpfr(0)
        for k in range(jmax):
            sbk = gmpy2.sqrt(table.beta[k]) if k > 0 else mpfr(0)
            r = ((x - table.alpha[k]) * Q[-1] - sbk * qm) / gmpy2.sqrt(table.beta[k + 1])
            qm = Q[-1]
            Q.append(r)
        worst = mpfr(0)
        for j in range(jmax + 1):
            for k in range(j + 1):
                g = np.dot(Q[j], Q[k]) - (1 if j == k else 0)
                worst = max(worst, abs(g))
        return worst


def kernel_trace(table, grid=None, n=None):
    """int K_n(x, x) dx on a refined grid via the confluent CD formula."""
    spec = table.spec
    n = spec.n if n is None else n
    if grid is None:
        grid = build_grid(spec, refine=2)
    grid = shift_grid(grid, spec.lam)
    with precision(spec.prec):
        w = weight_on_grid(spec, grid)
        x = grid.nodes
        sbn = gmpy2.sqrt(table.beta[n])
        p = [np.array([1 / gmpy2.sqrt(table.beta[0])] * len(x), dtype=object)]
        dp = [np.zeros(len(x), dtype=object) * mpfr(0)]
        pm = dp[0]
        dpm = dp[0]
        for k in range(n):
            sbk = gmpy2.sqrt(table.beta[k]) if k > 0 else mpfr(0)
            sb1 = gmpy2.sqrt(table.beta[k + 1])
            nxt = ((x - table.alpha[k]) * p[-1] - sbk * pm) / sb1
            dnxt = (p[-1] + (x - table.alpha[k]) * dp[-1] - sbk * dpm) / sb1
            pm, dpm = p[-1], dp[-1]
            p.append(nxt)
            dp.append(dnxt)
        diag = w * sbn * (dp[n] * p[n - 1] - dp[n - 1] * p[n])
        return np.dot(grid.weights, diag), min(diag)
