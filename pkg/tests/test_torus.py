import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import ive

from latticesir.errors import InsufficientPoints, TorusSaturated, ZeroMobility
from latticesir.kernel import LatticeSpec, build_kernel, kernel_nearest_neighbor
from latticesir.torus import (
    forward_transform,
    green_function,
    inverse_transform,
    p00,
    p00_decay_fit,
    smallk_order,
    transition_probability,
)


def bessel_walk_1d(kappa, t, n, x):
    """Nearest-neighbour walk on Z_n from the modified Bessel series, images summed."""
    s = kappa * t
    return sum(ive(abs(x + m * n), s) for m in range(-6, 7))


def watson_oracle():
    """G_0(0,0) for the d=3 nearest-neighbour walk at kappa=1 by direct quadrature."""
    f = lambda t: ive(0, t / 3.0) ** 3
    head, _ = quad(f, 0, 2000, limit=400)
    # tail: I0e(s) ~ 1/sqrt(2 pi s) (1 + 1/(8s)), s = t/3
    tail = (3 / (2 * math.pi)) ** 1.5 * 2 / math.sqrt(2000)
    return head + tail


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_transition_matches_bessel_1d(t):
    lat = LatticeSpec(1, 16)
    p = transition_probability(kernel_nearest_neighbor(1), 1.0, t, lat)
    for x in range(16):
        assert p.at(x) == pytest.approx(bessel_walk_1d(1.0, t, 16, x), rel=1e-12, abs=1e-18)


def test_known_values():
    lat = LatticeSpec(1, 64)
    k = kernel_nearest_neighbor(1)
    assert transition_probability(k, 1.0, 1.0, lat).at(0) == pytest.approx(0.4657596075936404, rel=1e-12)
    assert p00(k, 1.0, 10.0, lat) == pytest.approx(float(ive(0, 10.0)), rel=1e-12)


def test_series_keeps_relative_accuracy_far_away():
    lat = LatticeSpec(1, 32)
    p = transition_probability(kernel_nearest_neighbor(1), 1.0, 0.5, lat, method="series")
    assert p.at(14) == pytest.approx(float(ive(14, 0.5)), rel=1e-10)


def test_product_structure_2d():
    lat = LatticeSpec(2, 16)
    p = transition_probability(kernel_nearest_neighbor(2), 2.0, 1.5, lat)
    for x, y in [(0, 0), (1, 0), (2, 3), (15, 1)]:
        ref = bessel_walk_1d(1.0, 1.5, 16, x) * bessel_walk_1d(1.0, 1.5, 16, y)
        assert p.at((x, y)) == pytest.approx(ref, rel=1e-11)


def test_transform_roundtrip():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(6, 6))
    assert np.allclose(inverse_transform(forward_transform(f)).real, f, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.sampled_from([1, 2]))
def test_chapman_kolmogorov_and_mass(s, t, d):
    lat = LatticeSpec(d, 8)
    k = kernel_nearest_neighbor(d)
    ps = transition_probability(k, 1.0, s, lat).values
    pt = transition_probability(k, 1.0, t, lat).values
    pst = transition_probability(k, 1.0, s + t, lat).values
    conv = np.real(np.fft.ifftn(np.fft.fftn(ps) * np.fft.fftn(pt)))
    assert np.allclose(conv, pst, atol=1e-13)
    assert math.isclose(pst.sum(), 1.0, abs_tol=1e-13)
    assert pst.min() >= -1e-15


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 20.0))
def test_p00_is_maximum(t):
    lat = LatticeSpec(1, 32)
    p = transition_probability(kernel_nearest_neighbor(1), 1.0, t, lat).values
    assert p.max() == pytest.approx(p[0], abs=1e-15)


def test_green_recurrent_low_dimensions():
    for d in (1, 2):
        res = green_function(kernel_nearest_neighbor(d), 1.0, 0.0, LatticeSpec(d, 32))
        assert res.regime == "recurrent"
        assert math.isinf(res.value)
        assert res.to_dict()["value"] == "infinite"


def test_green_transient_d3_matches_watson():
    k = kernel_nearest_neighbor(3)
    g32 = green_function(k, 1.0, 0.0, LatticeSpec(3, 32))
    g64 = green_function(k, 1.0, 0.0, LatticeSpec(3, 64))
    assert g32.regime == "transient"
    assert abs(g32.value - g64.value) <= 1e-3
    assert g64.value == pytest.approx(watson_oracle(), rel=1e-3)
    # frozen from the quadrature oracle
    assert g64.value == pytest.approx(1.516386, abs=2e-5)


def test_green_positive_lambda_exact():
    # 1D nearest neighbour: G_lam(0,0) = 1 / sqrt(lam (lam + 2 kappa))
    res = green_function(kernel_nearest_neighbor(1), 1.0, 0.5, LatticeSpec(1, 512))
    assert res.value == pytest.approx(1 / math.sqrt(0.5 * 2.5), rel=1e-10)


def test_green_needs_mobility():
    with pytest.raises(ZeroMobility):
        green_function(kernel_nearest_neighbor(3), 0.0, 0.0, LatticeSpec(3, 8))


def test_drift_kernel_first_order():
    k = build_kernel(1, [((1,), 0.7), ((-1,), 0.3)], allow_asymmetric=True)
    assert smallk_order(k) == 1
    assert smallk_order(kernel_nearest_neighbor(2)) == 2
    res = green_function(k, 1.0, 0.0, LatticeSpec(1, 64))
    assert res.regime == "transient" and res.conjectural
    # int_0^inf exp(-t) I0(2 sqrt(0.21) t) dt = 1 / sqrt(1 - 0.84)
    direct, _ = quad(lambda t: ive(0, 2 * math.sqrt(0.21) * t) * math.exp((2 * math.sqrt(0.21) - 1) * t),
                     0, math.inf, limit=400)
    assert res.value == pytest.approx(direct, rel=1e-6)
    assert res.value == pytest.approx(2.5, rel=1e-9)


def test_drift_kernel_two_dimensions():
    k = build_kernel(2, [((1, 0), 0.35), ((-1, 0), 0.15), ((0, 1), 0.25), ((0, -1), 0.25)],
                     allow_asymmetric=True)
    res = green_function(k, 1.0, 0.0, LatticeSpec(2, 256))
    # frozen from sum_j P(S_j = 0) of the jump chain on an 801^2 box, 1500 steps
    assert res.value == pytest.approx(1.70285, rel=1e-3)


def test_decay_fit_guards():
    k = kernel_nearest_neighbor(1)
    with pytest.raises(InsufficientPoints):
        p00_decay_fit(k, 1.0, [50, 100], LatticeSpec(1, 4096))
    with pytest.raises(TorusSaturated):
        p00_decay_fit(k, 1.0, [50, 100, 200, 400], LatticeSpec(1, 32))
