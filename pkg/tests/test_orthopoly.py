import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr
from scipy.integrate import dblquad

from pgue import orthopoly as op
from pgue import scaling as sc
from pgue.scaling import EnsembleSpec, precision


def _gue(n, N=None):
    spec = EnsembleSpec(n, 0, (0, 0))
    return spec, op.stieltjes(spec, N or n, op.build_grid(spec))


def test_gaussian_moments():
    spec, tab = _gue(1, 8)
    with precision(256):
        assert abs(tab.beta[0] - gmpy2.sqrt(gmpy2.const_pi() / 2)) < mpfr(10) ** -30
        # mu_2 / mu_0 = alpha_0^2 + beta_1 = 1/8 for exp(-2 x^2)
        assert abs(tab.beta[1] - mpfr(1) / 4) < mpfr(10) ** -30


def test_gue_recurrence():
    spec, tab = _gue(1, 10)
    with precision(256):
        for k in range(10):
            assert abs(tab.alpha[k]) < mpfr(10) ** -60
        for k in range(1, 11):
            assert abs(tab.beta[k] - mpfr(k) / 4) < mpfr(10) ** -60
            # norm recursion gamma_k^2 = 1/(beta_1 .. beta_k mu_0)
            prod = tab.beta[0]
            for j in range(1, k + 1):
                prod *= tab.beta[j]
            assert abs(tab.gamma[k] ** 2 * prod - 1) < mpfr(10) ** -60


def test_grid_refinement_self_consistency():
    spec = sc.ensemble_from_tau(16, 0.0, (1, 1))
    a = op.stieltjes(spec, 4, op.build_grid(spec)).beta[0]
    b = op.stieltjes(spec, 4, op.build_grid(spec, refine=2)).beta[0]
    with precision(256):
        assert abs(a - b) < mpfr(10) ** -60 * a
    g = op.build_grid(spec)
    assert all(x < y for x, y in zip(g.nodes[:-1], g.nodes[1:]))
    assert all(x != spec.lam for x in g.nodes)


def test_partition_closed_forms():
    with precision(256):
        z1 = op.partition_Zn(_gue(1)[1])
        z2 = op.partition_Zn(_gue(2)[1])
        pi = gmpy2.const_pi()
        assert abs(z1 - gmpy2.log(gmpy2.sqrt(pi / 2))) < mpfr(10) ** -20
        assert abs(z2 - gmpy2.log(pi / 16)) < mpfr(10) ** -20
        assert abs(op.zn_gue(1) - gmpy2.log(gmpy2.sqrt(pi / 2))) < mpfr(10) ** -60
        assert abs(op.zn_gue(2) - gmpy2.log(pi / 16)) < mpfr(10) ** -60
        for n in (3, 7, 12):
            assert abs(op.partition_Zn(_gue(n)[1]) - op.zn_gue(n)) < mpfr(10) ** -40


def test_partition_brute_force_2d():
    spec = EnsembleSpec(2, 2, (0, 0.1))
    tab = op.stieltjes(spec, 2, op.build_grid(spec))
    V = lambda x: 2 * x * x + 0.1 / (x - 2) ** 2
    f = lambda y, x: (x - y) ** 2 * math.exp(-2 * (V(x) + V(y)))
    # the integrand vanishes to all orders at x = 2; split there
    tot = 0.0
    for (a, b) in ((-6, 2), (2, 6)):
        for (c, d) in ((-6, 2), (2, 6)):
            tot += dblquad(f, a, b, c, d, epsabs=1e-15, epsrel=1e-14)[0]
    # Z_n carries no 1/n! (Z_2 = pi/16 at t = 0)
    assert float(op.partition_Zn(tab)) == pytest.approx(math.log(tot), abs=1e-12)


def test_engine_invariants_n8():
    spec = sc.ensemble_from_tau(8, 0.0, (1, 1))
    tab = op.stieltjes(spec, 8, op.build_grid(spec))
    assert all(b > 0 for b in tab.beta)
    assert op.orthogonality_residual(tab, 8) < mpfr(10) ** -25
    integral, dmin = op.kernel_trace(tab)
    assert abs(integral - 8) < 1e-10
    assert dmin >= -1e-20


def test_orthogonality_n4():
    spec = sc.ensemble_from_tau(4, 0.0, (1, 1))
    tab = op.stieltjes(spec, 12, op.build_grid(spec))
    assert op.orthogonality_residual(tab, 12) < mpfr(10) ** -25


def test_cd_kernel_properties():
    spec = sc.ensemble_from_tau(8, 0.0, (1, 1))
    tab = op.stieltjes(spec, 8, op.build_grid(spec))
    x, y = mpfr("0.7", 256), mpfr("1.2", 256)
    assert op.cd_kernel(tab, x, y) == op.cd_kernel(tab, y, x)
    assert op.cd_kernel(tab, spec.lam, y) == 0


def test_first_identity_and_sign():
    spec = EnsembleSpec(4, 1.5, (0.01, 0.001))
    grid = op.build_grid(spec)
    tab = op.recurrence_at(spec, grid)
    rhs = op.dlogZ_dlambda(spec, tab)
    fd = op.fd_dlogZ(spec, grid)
    with precision(256):
        assert abs(fd - rhs) / abs(rhs) < mpfr(10) ** -8
    assert rhs < 0
    # the unperturbed side has no lambda dependence
    spec0 = EnsembleSpec(4, 1.5, (0, 0))
    tab0 = op.recurrence_at(spec0, op.build_grid(spec0))
    assert abs(op.dlogZ_dlambda(spec0, tab0)) < mpfr(10) ** -60


def test_large_lambda_derivative_asymptotics():
    # far outside the bulk ln Z_n' ~ 2 n^2 t_1 (1 - lam / sqrt(lam^2 - 1))
    n, lam, t1 = 6, 3.0, 1e-5
    spec = EnsembleSpec(n, lam, (t1, 1e-9))
    val = float(op.dlogZ_dlambda(spec, op.recurrence_at(spec, op.build_grid(spec))))
    ref = 2 * n * n * t1 * (1 - lam / math.sqrt(lam * lam - 1))
    assert val == pytest.approx(ref, rel=1e-2)


def test_y_edge_and_second_identity():
    spec = EnsembleSpec(4, 1.5, (0.01, 0.001))
    grid = op.build_grid(spec)
    tab = op.recurrence_at(spec, grid)
    yd = op.y_edge(spec, tab, grid)
    with precision(256):
        assert abs(op.det2(yd.Yval) - 1) < mpfr(10) ** -20
        assert abs(op.det2(yd.H) - 1) < mpfr(10) ** -20
        # (Y_1)_12 (Y_1)_21 = (gamma_{n-1}/gamma_n)^2 = beta_n
        assert abs(yd.Y1_12_21 - tab.beta[4]) < mpfr(10) ** -40
        fd2 = op.fd_d2logZ(spec, grid)
        rhs = op.identity2_rhs(spec, yd)
        assert abs(fd2 - rhs) / abs(rhs) < mpfr(10) ** -6
        assert abs(op.d2logZ_closed(spec, tab) - rhs) / abs(rhs) < mpfr(10) ** -6


def _b1_at(n, s):
    return float(op.b1_oracle(n, sc.lambda_of_sloc(n, s), (1, 1), window=None)[0])


def test_b1_oracle_window():
    with pytest.raises(sc.DomainError):
        op.b1_oracle(128, sc.lambda_of_sloc(128, 20.0), (1, 1))


def test_b1_oracle_tail_converges(traj11):
    # at s = 20 the finite-n estimate approaches b_1(20) as n grows
    s = 20.0
    lim = traj11.b(s)
    d128 = abs(_b1_at(128, s) / lim - 1)
    d256 = abs(_b1_at(256, s) / lim - 1)
    assert d256 < 0.8 * d128


@pytest.mark.xfail(strict=True, reason="n = 128 puts lam - 1 = 0.38 outside the scaling "
                   "window; measured ratio to the tail law is 0.60 (0.70 at n = 256)")
def test_b1_oracle_tail_within_30_percent_at_n128():
    s = 20.0
    assert _b1_at(128, s) == pytest.approx(-1 / (2 * s ** 1.5), rel=0.3)
