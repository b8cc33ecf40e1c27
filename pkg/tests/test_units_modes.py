import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslfield import ModelParams, ModeGrid, build_mode_grid, dispersion, oscillation_period, stroboscopic_times


def grid(L, k_max, m=0.1):
    return build_mode_grid(ModelParams(m, 1.0, L, k_max))


def test_grid_unit_spacing():
    g = grid(2 * math.pi, 3.25)
    assert g.dk == pytest.approx(1.0)
    np.testing.assert_allclose(g.k_values, [0.5, 1.5, 2.5])


def test_grid_half_spacing():
    g = grid(4 * math.pi, 1.1)
    assert g.dk == pytest.approx(0.5)
    np.testing.assert_allclose(g.k_values, [0.25, 0.75])


def test_grid_too_few_modes():
    with pytest.raises(ValueError, match="at least 2"):
        grid(2 * math.pi, 0.4, m=0.01)


def test_grid_is_read_only():
    g = grid(10.0, 5.0)
    with pytest.raises(ValueError):
        g.k_values[0] = 1.0


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.0, 1.0, 10.0, 5.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, -1.0, 10.0, 5.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 1.0, 10.0, 0.5)


def test_mode_grid_rejects_unsorted():
    with pytest.raises(ValueError):
        ModeGrid(np.array([1.0, 0.5]), 0.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(10.0, 500.0), st.floats(1.5, 50.0))
def test_grid_spacing_uniform(L, k_max):
    g = build_mode_grid(ModelParams(1.0, 1.0, L, k_max))
    assert np.all(np.abs(np.diff(g.k_values) - g.dk) < 1e-12 * g.dk)
    assert g.k_values[-1] <= k_max


def test_dispersion_values():
    assert dispersion(0.0, 2.0) == 2.0
    assert dispersion(3.0, 4.0) == pytest.approx(5.0)
    np.testing.assert_allclose(dispersion(np.array([0.0, 1.0]), 1.0), [1.0, math.sqrt(2)])
    with pytest.raises(ValueError):
        dispersion(-1.0, 1.0)


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3), st.floats(0.01, 10.0))
def test_dispersion_monotone(k1, k2, m):
    lo, hi = sorted((k1, k2))
    assert dispersion(lo, m) <= dispersion(hi, m)
    assert dispersion(lo, m) <= dispersion(lo, m * 1.5)


def test_dispersion_massless_limit():
    m = 0.7
    k = 1e3 * m
    assert abs(dispersion(k, m) - k) < 1e-6 * m * 1e3


def test_oscillation_period():
    assert oscillation_period(1.0) == pytest.approx(6.28319, abs=1e-5)
    assert oscillation_period(2 * math.pi) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oscillation_period(0.0)


def test_stroboscopic_full():
    tau = 2 * math.pi
    st_ = stroboscopic_times(10 * tau, 1.0, 10)
    np.testing.assert_allclose(st_.times, tau * np.arange(1, 11))
    assert not st_.warning


def test_stroboscopic_empty():
    with pytest.warns(UserWarning):
        st_ = stroboscopic_times(0.5 * 2 * math.pi, 1.0, 5)
    assert len(st_.times) == 0
    assert st_.warning


def test_stroboscopic_thinning():
    tau = 2 * math.pi / 3.0
    st_ = stroboscopic_times(100 * tau, 3.0, 4)
    np.testing.assert_array_equal(st_.multiples, [25, 50, 75, 100])


@settings(max_examples=50, deadline=None)
@given(st.floats(7.0, 5e3), st.floats(1.0, 10.0), st.integers(1, 50))
def test_stroboscopic_zero_phase(t_final, m, n):
    st_ = stroboscopic_times(t_final, m, n)
    assert len(st_.times) <= n
    assert np.all(st_.times <= t_final * (1 + 1e-12))
    assert np.all(np.abs(np.sin(m * st_.times)) < 1e-8 * np.maximum(1.0, st_.multiples / 1e3))
