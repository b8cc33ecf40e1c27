import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from cslfield import (
    ClumpPair,
    ClumpProfile,
    ModelParams,
    build_mode_grid,
    chi_momentum,
    chi_position,
    clump_overlap,
    log_clump_overlap,
)
from cslfield.fock_oracle import coherent_overlap_oracle


def test_chi_position_peak_and_efold():
    p = ClumpProfile(1.0, 1.0, 0.0)
    assert chi_position(0.0, p) == pytest.approx(0.63162, abs=1e-5)
    assert chi_position(2.0, p) == pytest.approx(0.63162 / math.e, abs=1e-5)
    assert chi_position(2.0, p) == pytest.approx(0.23235, abs=1e-5)


def test_chi_position_norm():
    p = ClumpProfile(7.0, 0.3, 1.0)
    val, _ = quad(lambda x: chi_position(x, p) ** 2, -np.inf, np.inf, epsabs=1e-13)
    assert val == pytest.approx(7.0, rel=1e-10)


def test_chi_momentum_values():
    p = ClumpProfile(1.0, 1.0, 0.0)
    assert chi_momentum(0.0, p) == pytest.approx(0.89325, abs=1e-5)
    assert abs(chi_momentum(1.0, p)) == pytest.approx(0.89325 / math.e, abs=1e-5)
    q = ClumpProfile(2.0, 0.7, 1.3)
    assert chi_momentum(-0.4, q) == pytest.approx(np.conj(chi_momentum(0.4, q)))


def test_chi_momentum_norm_and_transform():
    p = ClumpProfile(4.0, 0.5, 0.3)
    val, _ = quad(lambda k: abs(chi_momentum(k, p)) ** 2, -np.inf, np.inf, epsabs=1e-13)
    assert val == pytest.approx(4.0, rel=1e-10)
    # direct Fourier quadrature of chi(x)
    k = 1.7
    re, _ = quad(lambda x: chi_position(x, p) * math.cos(k * x), -20, 20, epsabs=1e-14, limit=200)
    im, _ = quad(lambda x: -chi_position(x, p) * math.sin(k * x), -20, 20, epsabs=1e-14, limit=200)
    assert abs((re + 1j * im) / math.sqrt(2 * math.pi) - chi_momentum(k, p)) < 1e-12


def test_parseval_on_grid():
    p = ClumpProfile(3.0, 1.2, 0.0)
    g = build_mode_grid(ModelParams(1.0, 1.0, 200.0, 8.0 / 1.2 + 1.0))
    # k>0 half-line sum counts both signs through the factor 2
    s = 2.0 * g.dk * np.sum(np.abs(chi_momentum(g.k_values, p)) ** 2)
    assert abs(s - 3.0) < 1e-8 * 3.0


def test_overlap_examples():
    a = ClumpProfile(10.0, 1.0, 0.0)
    b = ClumpProfile(10.0, 1.0, 4.0)
    assert clump_overlap(a, a) == 1.0
    # frozen from the truncated-Fock mode-product oracle (76 modes, n_max=40)
    assert clump_overlap(a, b) == pytest.approx(1.7571500456628144e-4, rel=1e-10)
    assert log_clump_overlap(a, b) == pytest.approx(-8.64665, abs=1e-5)
    far = ClumpProfile(1.0, 1.0, 1e4)
    assert clump_overlap(ClumpProfile(1.0, 1.0, 0.0), far) == pytest.approx(0.367879, abs=1e-6)


def test_overlap_huge_n_stays_finite():
    a, b = ClumpProfile(1e6, 1.0, 0.0), ClumpProfile(1e6, 1.0, 1e3)
    assert log_clump_overlap(a, b) == pytest.approx(-1e6)
    assert clump_overlap(a, b) == 0.0
    c, d = ClumpProfile(1e12, 1.0, 0.0), ClumpProfile(1e12, 1.0, 50.0)
    assert math.isfinite(log_clump_overlap(c, d))


def test_mismatched_pair_rejected():
    with pytest.raises(ValueError):
        ClumpPair(ClumpProfile(1.0, 1.0), ClumpProfile(2.0, 1.0))
    with pytest.raises(ValueError):
        clump_overlap(ClumpProfile(1.0, 1.0), ClumpProfile(1.0, 2.0))
    with pytest.raises(ValueError):
        ClumpProfile(-1.0, 1.0)


def test_pair_indexing():
    pair = ClumpPair(ClumpProfile(2.0, 1.0, -1.0), ClumpProfile(2.0, 1.0, 3.0))
    assert pair[1].center == -1.0 and pair[2].center == 3.0
    assert pair.separation == 4.0
    with pytest.raises(IndexError):
        pair[3]


def test_width_warning():
    with pytest.warns(UserWarning):
        assert not ClumpProfile(1.0, 0.5).check_width(1.0)
    assert ClumpProfile(1.0, 5.0).check_width(1.0)


@given(st.floats(0.1, 5.0), st.floats(0.2, 3.0), st.floats(-5, 5), st.floats(-5, 5))
def test_overlap_symmetric_and_bounded(N, sigma, l1, l2):
    a, b = ClumpProfile(N, sigma, l1), ClumpProfile(N, sigma, l2)
    assert clump_overlap(a, b) == clump_overlap(b, a)
    assert 0.0 < clump_overlap(a, b) <= 1.0


def test_overlap_decreasing_in_separation():
    vals = [clump_overlap(ClumpProfile(2.0, 1.0, 0.0), ClumpProfile(2.0, 1.0, d)) for d in np.linspace(0, 6, 13)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("N,sep", [(0.5, 1.0), (2.0, 2.0), (4.0, 1.5)])
def test_overlap_against_fock_oracle(N, sep):
    a, b = ClumpProfile(N, 1.0, 0.0), ClumpProfile(N, 1.0, sep)
    # six modes spanning the clump spectrum
    g = build_mode_grid(ModelParams(1.0, 0.0, 2 * math.pi / 0.5, 3.0))
    assert g.n_modes == 6
    # full-line integral folded onto k > 0
    ca, cb = chi_momentum(g.k_values, a), chi_momentum(g.k_values, b)
    closed = math.exp(
        2.0 * math.fsum(g.dk * (np.conj(ca) * cb).real)
        - math.fsum(g.dk * np.abs(ca) ** 2)
        - math.fsum(g.dk * np.abs(cb) ** 2)
    )
    assert abs(coherent_overlap_oracle(a, b, g, 40) - closed) < 1e-6


def test_overlap_oracle_converges_in_n_max():
    a, b = ClumpProfile(4.0, 1.0, 0.0), ClumpProfile(4.0, 1.0, 3.0)
    g = build_mode_grid(ModelParams(1.0, 0.0, 2 * math.pi / 0.5, 3.0))
    exact = coherent_overlap_oracle(a, b, g, 60)
    errs = [abs(coherent_overlap_oracle(a, b, g, n) - exact) for n in (1, 2, 3, 4, 6)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
