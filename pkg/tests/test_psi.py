import cmath
import math

import numpy as np
import pytest
from scipy.special import airy

from pgue import painleve as P
from pgue.lax import PathError
from pgue.psi import (LaxCoefficients, PsiVector, _kernel_from, airy_kernel, airy_parametrix,
                      det_A_coefficients, kernel_K_psi, kernel_matrix, lax_matrix, psi_solve)


# --- Airy reference ---------------------------------------------------------

T = 2 * math.pi / 3
# (ray angle, jump, sign of the arg offset that reaches the + side)
RAYS = [(0.0, np.array([[1, 1], [0, 1]]), +1),
        (T, np.array([[1, 0], [1, 1]]), -1),
        (-T, np.array([[1, 0], [1, 1]]), -1),
        (math.pi, np.array([[0, 1], [-1, 0]]), -1)]


@pytest.mark.parametrize("ray", RAYS, ids=["pos", "up", "down", "neg"])
@pytest.mark.parametrize("r", [0.3, 1.0, 4.0])
def test_airy_parametrix_jumps(ray, r):
    th, J, sgn = ray
    d = 1e-9
    plus = airy_parametrix(r * cmath.exp(1j * (th + sgn * d)))
    minus = airy_parametrix(r * cmath.exp(1j * (th - sgn * d)))
    np.testing.assert_allclose(plus, minus @ J, atol=1e-7 * max(1, np.abs(plus).max()))


@pytest.mark.parametrize("th", [0.3, 1.8, 2.9, -0.7, -2.5])
def test_airy_parametrix_unimodular(th):
    assert np.linalg.det(airy_parametrix(2.0 * cmath.exp(1j * th))) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("r", [20.0, 30.0, 40.0])
@pytest.mark.parametrize("th", [0.0, 1.0, 2.0, 3.0, -1.5, -2.5])
def test_airy_parametrix_asymptotics(r, th):
    z = r * cmath.exp(1j * th)
    t = 2 / 3 * z ** 1.5
    lead = np.array([[1, 1j], [1j, 1]]) + np.array([[-5, 5j], [7j, -7]]) / (48 * z ** 1.5)
    L = np.diag([z ** -0.25, z ** 0.25]) @ lead / math.sqrt(2)
    M = airy_parametrix(z) @ np.diag([cmath.exp(t), cmath.exp(-t)])
    # next correction is O(zeta^{-3})
    assert np.abs(np.linalg.solve(L, M) - np.eye(2)).max() < 0.15 / r ** 3


def test_airy_parametrix_origin():
    with pytest.raises(PathError):
        airy_parametrix(0.0)


def test_airy_kernel_values():
    ai0, aip0, _, _ = airy(0.0)
    assert airy_kernel(0.0, 0.0) == pytest.approx(aip0 ** 2, rel=1e-14)
    for x, y in [(0.3, -1.2), (2.0, 5.0), (-4.0, -3.5)]:
        assert airy_kernel(x, y) == pytest.approx(airy_kernel(y, x), rel=1e-13)
    # confluent limit
    assert airy_kernel(0.7, 0.7 + 1e-6) == pytest.approx(airy_kernel(0.7, 0.7), rel=1e-5)
    assert all(airy_kernel(x, x) > 0 for x in np.linspace(-6, 4, 21))


# --- Lax matrix ------------------------------------------------------------

@pytest.fixture(scope="module")
def coeffs(traj11):
    return {s: LaxCoefficients.from_state(traj11.state(s)) for s in (-2.0, 0.0, 5.0)}


def test_lax_matrix_traceless(coeffs):
    for c in coeffs.values():
        for z in (0.4 + 0.1j, -2.0, 3.0j):
            assert abs(np.trace(lax_matrix(c, z))) < 1e-13
        assert all(abs(np.trace(a)) < 1e-14 for a in c.Ak)


def test_det_A_expansion(coeffs, traj11):
    tt = P.tau_tilde((1.0, 1.0))
    for s, c in coeffs.items():
        d = det_A_coefficients(c)
        # leading zeta and s terms, and the constants -tilde tau_p at the top orders
        assert d[-1] == pytest.approx(-1.0, abs=1e-12)
        assert d[0] == pytest.approx(-c.s, abs=1e-12)
        # zeta^{-1} coefficient carries a_1 - s^2/4 = -int_s^inf b_1
        assert d[1] == pytest.approx(traj11.a1(s) - s * s / 4, abs=1e-7)
        for p, t in zip(range(c.K + 1, 2 * c.K + 1), tt):
            assert d[p] == pytest.approx(-t, abs=1e-10)


def test_lax_matrix_origin(coeffs):
    with pytest.raises(PathError):
        lax_matrix(coeffs[0.0], 0.0)


# --- psi --------------------------------------------------------------------

def test_psi_airy_case():
    c = LaxCoefficients.airy(0.5)
    for x in (1.0, 2.0, -1.5, -3.0):
        p = psi_solve(c, x)
        a, ap, _, _ = airy(x + 0.5)
        ref = math.sqrt(2 * math.pi) * cmath.exp(-0.25j * math.pi) * np.array([a, ap])
        np.testing.assert_allclose(p.vector, ref, atol=1e-9)
    r = psi_solve(c, 2.0).psi1 / psi_solve(c, 1.0).psi1
    assert r.real == pytest.approx(airy(2.5)[0] / airy(1.5)[0], rel=1e-9)


def test_psi_radius_and_angle_independent(coeffs):
    c = coeffs[0.0]
    for x in (1.5, -2.0):
        a = psi_solve(c, x, R=50).vector
        b = psi_solve(c, x, R=100).vector
        assert np.abs(a - b).max() < 1e-7 * np.abs(a).max()
    a = psi_solve(c, 1.5).vector
    b = psi_solve(c, 1.5, eps=0.05).vector
    assert np.abs(a - b).max() < 1e-8 * np.abs(a).max()


def test_psi_real_up_to_phase(coeffs):
    for c in coeffs.values():
        for x in (-3.0, -0.5, 0.5, 3.0):
            assert psi_solve(c, x).realness_defect() < 1e-9


def test_psi_decays_right(coeffs):
    c = coeffs[0.0]
    vals = [abs(psi_solve(c, x).psi1) for x in np.linspace(2, 6, 5)]
    assert np.all(np.diff(vals) < 0)


def test_psi_errors(coeffs):
    c = coeffs[0.0]
    with pytest.raises(PathError):
        psi_solve(c, 0.0)
    with pytest.raises(ValueError):
        psi_solve(c, 1.0, R=10.0)


# --- kernel -----------------------------------------------------------------

def test_kernel_reduces_to_airy():
    s = 0.8
    c = LaxCoefficients.airy(s)
    for u, v in [(1.0, -2.0), (0.5, 0.5), (-1.3, -0.4), (3.0, 1.0)]:
        assert kernel_K_psi(c, u, v) == pytest.approx(airy_kernel(u + s, v + s), abs=1e-9)


def test_kernel_matrix_symmetric_positive(coeffs):
    xs = [-4.0, -2.5, -1.0, -0.2, 0.3, 1.0, 2.5, 4.0]
    for c in coeffs.values():
        K = kernel_matrix(c, xs)
        np.testing.assert_allclose(K, K.T, atol=0)
        assert np.all(np.diag(K) > 0)
        # matrix entries agree with single evaluation
        assert K[1, 5] == pytest.approx(kernel_K_psi(c, xs[1], xs[5]), abs=1e-9)


def test_kernel_confluent_limit(coeffs):
    c = coeffs[0.0]
    for x in (-1.5, 2.0):
        k0 = kernel_K_psi(c, x, x)
        k1 = kernel_K_psi(c, x, x + 1e-5)
        assert k1 == pytest.approx(k0, rel=1e-4)


def test_kernel_invariant_under_unimodular_factor(coeffs):
    rng = np.random.default_rng(7)
    c = coeffs[0.0]
    pu, pv = psi_solve(c, -1.0), psi_solve(c, 2.0)
    M = rng.normal(size=(2, 2))
    M /= math.sqrt(abs(np.linalg.det(M)))
    if np.linalg.det(M) < 0:
        M[0] *= -1

    def tr(p):
        a, b = M @ p.vector, M @ np.array([p.dpsi1, p.dpsi2])
        return PsiVector(p.x, a[0], a[1], b[0], b[1])

    for p, q in [(pu, pv), (pu, pu)]:
        assert _kernel_from(tr(p), tr(q), 1e-6) == pytest.approx(_kernel_from(p, q, 1e-6), rel=1e-10)


def test_psi_continuous_across_match_point(coeffs):
    # the two evaluation routes agree where they hand over
    for s, c in coeffs.items():
        for x1 in (1.0, -(max(1.0, s) + 1.0)):
            a = psi_solve(c, x1 * (1 - 1e-12)).vector
            b = psi_solve(c, x1 * (1 + 1e-12)).vector
            assert np.abs(a - b).max() < 1e-8 * np.abs(b).max()


def test_kernel_diagonal_small_near_origin(coeffs):
    # the density vanishes at the singular point like exp(-2 tau_2 / x^2)
    for c in coeffs.values():
        d = [kernel_K_psi(c, x, x) for x in (-0.3, -0.2, -0.1, 0.1, 0.2, 0.3)]
        assert all(v >= 0 for v in d)
        assert d[2] < 1e-40 and d[3] < 1e-40
        assert d[2] < d[1] < d[0] and d[3] < d[4] < d[5]


def test_kernel_airy_inside_turning_interval():
    # s > 0, x in (-s, 0): psi decays toward 0 and must still be accurate
    c = LaxCoefficients.airy(5.0)
    for x in (-4.0, -2.0, -0.5):
        assert kernel_K_psi(c, x, x) == pytest.approx(airy_kernel(x + 5, x + 5), rel=1e-6)
