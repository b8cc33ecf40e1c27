import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cslfield.fock_oracle import integrate_lindblad_x, position_wavefunctions
from cslfield.kernel_solution import (
    KernelCoeffs,
    closed_moments,
    coeffs_approx,
    coeffs_exact,
    initial_trace,
    kernel_trace,
    long_time_element,
    mehler_kernel,
    number_basis_matrix,
    p_matrix_element,
    short_time_element,
    thermal_map,
    x_matrix_element,
)


def approx_at_S(S, g1=0.0, g2=0.0, omega=1.0, lam=1.0):
    alpha = S / (1.0 - S)
    return coeffs_approx(alpha * 2.0 * omega / lam, omega, lam, g1, g2, stroboscopic=True)


@pytest.mark.parametrize("fn", [coeffs_exact, coeffs_approx])
def test_initial_coefficients(fn):
    c = fn(0.0, 1.3, 0.7, 0.4, -0.2)
    assert c.S == 0.0
    assert c.R == 0.0
    assert c.beta1 == pytest.approx(0.4)
    assert c.beta2_star == pytest.approx(-0.2)
    assert c.C == pytest.approx(math.exp(-(0.4**2 + 0.2**2) / 2), rel=1e-13)


def test_exact_s_matches_oracle_at_half_period():
    # frozen: rho_11 / rho_00 of the integrated vacuum at lam=1, w=1, t=pi
    c = coeffs_exact(math.pi, 1.0, 1.0, 0.0, 0.0)
    assert c.S == pytest.approx(0.6110154703555446, abs=1e-9)
    assert c.S == pytest.approx((math.pi / 2) / (math.pi / 2 + 1), rel=1e-12)
    assert abs(c.R) < 1e-15


def test_exact_s_and_r_match_oracle_at_quarter_period():
    # frozen: rho_11/rho_00 and rho_20/(sqrt2 rho_00) at lam=2, w=1, t=pi/2
    c = coeffs_exact(math.pi / 2, 1.0, 2.0, 0.0, 0.0)
    assert c.S == pytest.approx(0.541665325477941, abs=1e-9)
    assert c.S == pytest.approx(1 - 2.5708 / 5.6090, abs=1e-4)
    assert c.R == pytest.approx(0.08914254890736684j, abs=1e-9)


def test_exact_and_approx_agree_at_whole_period():
    t = 2 * math.pi
    ce = coeffs_exact(t, 1.0, 1.0, 0.3, 0.1)
    ca = coeffs_approx(t, 1.0, 1.0, 0.3, 0.1, stroboscopic=True)
    assert ca.S == pytest.approx(math.pi / (math.pi + 1), rel=1e-14)
    assert abs(ce.S - ca.S) < 1e-12
    assert abs(ce.beta1 - ca.beta1) < 1e-12
    assert abs(ce.C - ca.C) < 1e-12


def test_approx_asymptote():
    c = coeffs_approx(1e12, 1.0, 1.0, 0.2, 0.2)
    assert c.one_minus_S == pytest.approx(2e-12)
    assert abs(c.C) < 1e-11
    assert c.late_time


def test_stroboscopic_flag_is_explicit():
    t = 3.0
    plain = coeffs_approx(t, 1.0, 1.0, 0.5, 0.5)
    assert plain.beta1 == pytest.approx(plain.one_minus_S * 0.5 * cmath.exp(-3j))
    strobe = coeffs_approx(t, 1.0, 1.0, 0.5, 0.5, stroboscopic=True)
    assert strobe.beta1.imag == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.2, 3.0), st.floats(0.0, 3.0), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_exact_trace_conserved(t, omega, lam, g1, g2):
    c = coeffs_exact(t, omega, lam, g1, g2)
    assert 0.0 <= c.S < 1.0
    assert abs(kernel_trace(c) - initial_trace(g1, g2)) < 1e-10


def test_number_basis_matches_oracle_between_periods():
    g1, g2, lam, t = 0.7, 0.2, 2.0, 0.7
    dm = integrate_lindblad_x(g1, g2, lam, 1.0, t)
    M = dm.matrix
    K = number_basis_matrix(coeffs_exact(t, 1.0, lam, g1, g2), 40)
    assert np.max(np.abs(M[:41, :41] - K)) < 1e-6


def test_x_element_at_s0_is_product_of_gaussians():
    c = coeffs_approx(0.0, 1.0, 1.0, 0.4, -0.3)
    X, Xp = 0.3, -0.8
    want = math.sqrt(2 / math.pi) * math.exp(-((X - 0.4) ** 2) - (Xp + 0.3) ** 2)
    assert x_matrix_element(X, Xp, c) == pytest.approx(want, rel=1e-14)
    assert short_time_element(X, Xp, 0.0, 1.0, 1.0, 0.4, -0.3) == pytest.approx(want, rel=1e-14)


def test_x_element_centre_value():
    c = approx_at_S(0.5)
    assert c.S == pytest.approx(0.5)
    assert x_matrix_element(0.0, 0.0, c) == pytest.approx(0.46066, abs=1e-5)


def test_x_element_needs_approx_regime():
    with pytest.raises(ValueError):
        x_matrix_element(0.0, 0.0, coeffs_exact(1.0, 1.0, 1.0, 0.0, 0.0))


@pytest.mark.parametrize("S", [0.0, 0.3, 0.9, 0.999])
def test_x_element_trace(S):
    g1, g2 = 0.8, -0.3
    c = approx_at_S(S, g1, g2)
    val, _ = quad(lambda x: x_matrix_element(x, x, c), -np.inf, np.inf, epsabs=1e-14, epsrel=1e-12)
    assert val == pytest.approx(initial_trace(g1, g2), rel=1e-8)


def test_x_element_from_number_basis():
    # the closed kernel equals the Hermite-function expansion of the ansatz
    c = approx_at_S(0.6, 0.5, 0.1)
    n = 120
    M = number_basis_matrix(c, n)
    X = np.linspace(-2, 2, 7)
    psi = position_wavefunctions(n, X)
    expanded = psi.T @ M @ psi
    assert np.max(np.abs(expanded - x_matrix_element(X[:, None], X[None, :], c))) < 1e-12


def test_x_element_hermitian_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(10):
        S, g1, g2 = rng.uniform(0, 0.95), *rng.normal(size=2)
        X, Xp = rng.normal(size=2)
        a = x_matrix_element(X, Xp, approx_at_S(S, g1, g2))
        b = x_matrix_element(Xp, X, approx_at_S(S, g2, g1))
        assert a == b


def test_x_element_positive_semidefinite():
    X = np.linspace(-3, 3, 25)
    for S in (0.1, 0.5, 0.95):
        K = x_matrix_element(X[:, None], X[None, :], approx_at_S(S, 0.6, 0.6))
        assert np.min(np.linalg.eigvalsh(K)) > -1e-10


def test_p_element_is_relabelled_x_element():
    rng = np.random.default_rng(5)
    for _ in range(5):
        c = approx_at_S(rng.uniform(0, 0.9), *rng.normal(size=2))
        p, pp = rng.normal(size=2)
        assert p_matrix_element(p, pp, c) == x_matrix_element(p, pp, c)
    c0 = approx_at_S(0.0, 0.2, 0.5)
    val, _ = quad(lambda p: p_matrix_element(p, p, c0), -np.inf, np.inf)
    assert val == pytest.approx(initial_trace(0.2, 0.5), rel=1e-9)


def test_short_time_limit():
    omega, lam, g1, g2 = 1.0, 1.0, 0.5, 0.2
    t = 2e-3 * omega / lam  # S ~ 1e-3
    c = coeffs_approx(t, omega, lam, g1, g2, stroboscopic=True)
    rng = np.random.default_rng(1)
    for X, Xp in rng.uniform(-1.5, 1.5, size=(20, 2)):
        a = short_time_element(X, Xp, t, omega, lam, g1, g2)
        b = x_matrix_element(X, Xp, c)
        assert abs(a / b - 1) < 1e-2


def test_long_time_limit():
    omega, lam, g1, g2 = 1.0, 1.0, 0.5, 0.2
    t = 2e3 * omega / lam
    c = coeffs_approx(t, omega, lam, g1, g2, stroboscopic=True)
    rng = np.random.default_rng(2)
    # the kernel is only appreciable for |X - X'| of order sqrt(2w / lam t)
    for X, d in zip(rng.uniform(-3, 3, 20), rng.uniform(-0.03, 0.03, 20)):
        Xp = X + d
        a = long_time_element(X, Xp, t, omega, lam, g1, g2)
        b = x_matrix_element(X, Xp, c)
        assert abs(a / b - 1) < 1e-2


def test_long_time_trace_and_gamma_independence():
    t, omega, lam = 50.0, 1.0, 2.0
    val, _ = quad(lambda x: long_time_element(x, x, t, omega, lam, 0.7, 0.1), -np.inf, np.inf, epsrel=1e-12)
    assert val == pytest.approx(initial_trace(0.7, 0.1), rel=1e-10)
    assert long_time_element(0.3, 0.1, t, omega, lam, 0.4, 0.4) == long_time_element(0.3, 0.1, t, omega, lam, -2.0, -2.0)


def test_thermal_map():
    kT, n = thermal_map(math.exp(-1), 1.0)
    assert kT == pytest.approx(1.0)
    assert n == pytest.approx(1 / (math.e - 1))
    assert n == pytest.approx(0.58198, abs=1e-5)
    c = coeffs_approx(4.0, 1.0, 1.0, 0.0, 0.0)
    assert thermal_map(c.S, 1.0, c.one_minus_S)[1] == 2.0
    kT, n = thermal_map(1e-300, 1.0)
    assert kT < 2e-3 and n < 1e-299
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            thermal_map(bad, 1.0)


def test_mehler_values():
    X, Xp = 0.4, -0.2
    psi0 = position_wavefunctions(0, np.array([X, Xp]))[0]
    assert mehler_kernel(X, Xp, 0.0) == pytest.approx(psi0[0] * psi0[1])
    # frozen partial Hermite sum to n = 60
    assert mehler_kernel(0.0, 0.0, 0.5) == pytest.approx(0.9213177319235613, abs=1e-12)
    assert mehler_kernel(X, Xp, 0.7) == mehler_kernel(Xp, X, 0.7)
    with pytest.raises(ValueError):
        mehler_kernel(0.0, 0.0, 1.0)


def test_mehler_partial_sums_converge():
    X = np.linspace(-2, 2, 21)
    psi = position_wavefunctions(80, X)
    closed = mehler_kernel(X[:, None], X[None, :], 0.5)
    errs = []
    for n in (5, 10, 20, 30, 40, 80):
        w = 0.5 ** np.arange(n + 1)
        partial = (psi[: n + 1].T * w) @ psi[: n + 1]
        errs.append(np.max(np.abs(partial - closed)))
    # strictly decreasing until rounding level is reached
    assert all(b < a for a, b in zip(errs[:-1], errs[1:-1]))
    assert errs[-1] < 1e-8


def test_closed_moments_basics():
    g1, g2 = 0.7, 0.2
    tr = initial_trace(g1, g2)
    m0 = closed_moments(0.0, 1.0, 1.0, g1, g2)
    assert m0.a_mean == pytest.approx(g1 * tr)
    assert m0.n_mean == pytest.approx(g1 * g2 * tr)
    m1 = closed_moments(1.0, 2.0, 3.0, g1, g2)
    m2 = closed_moments(2.0, 2.0, 3.0, g1, g2)
    assert (m2.n_mean - m1.n_mean).real == pytest.approx(3.0 / 4.0 * tr)
    h = closed_moments(1.7, 1.0, 1.0, 0.4, 0.4)
    assert h.a2_mean == pytest.approx(np.conj(h.adag2_mean))


def test_coeffs_dataclass_alpha():
    c = coeffs_approx(3.0, 2.0, 4.0, 0.0, 0.0)
    assert isinstance(c, KernelCoeffs)
    assert c.alpha == 3.0
