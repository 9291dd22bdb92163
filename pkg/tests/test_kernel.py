import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticesir.errors import (
    AsymmetricKernel,
    DegenerateTruncation,
    DimensionMismatch,
    NegativeWeight,
    NonUnitMass,
    UnsupportedDimension,
    ZeroOffset,
)
from latticesir.kernel import (
    LatticeSpec,
    build_kernel,
    effective_diffusion,
    kernel_gaussian,
    kernel_nearest_neighbor,
    kernel_variance,
    symbol,
    symbol_grid,
)


def test_nearest_neighbor_weights():
    k = kernel_nearest_neighbor(2)
    assert k.weight((1, 0)) == 0.25
    assert k.weight((0, 0)) == 0.0
    assert k.weight((1, 1)) == 0.0
    assert k.mass == 1.0
    assert k.symmetric


@pytest.mark.parametrize(
    "entries, err",
    [
        ([((0,), 1.0)], ZeroOffset),
        ([((1,), 1.5), ((-1,), -0.5)], NegativeWeight),
        ([((1,), 0.4), ((-1,), 0.4)], NonUnitMass),
        ([((1,), 0.7), ((-1,), 0.3)], AsymmetricKernel),
    ],
)
def test_build_kernel_rejects(entries, err):
    with pytest.raises(err):
        build_kernel(1, entries)


def test_asymmetric_bypass_is_conjectural():
    k = build_kernel(1, [((1,), 0.7), ((-1,), 0.3)], allow_asymmetric=True)
    assert k.conjectural
    assert np.allclose(k.mean(), [0.4])


def test_unsupported_dimension():
    with pytest.raises(UnsupportedDimension):
        kernel_nearest_neighbor(4)
    with pytest.raises(UnsupportedDimension):
        LatticeSpec(0, 8)


def test_gaussian_truncation():
    with pytest.raises(DegenerateTruncation):
        kernel_gaussian(1, 4.0, 0)
    k = kernel_gaussian(1, 1e-6, 3)
    assert k.weight((1,)) == pytest.approx(0.5)


def test_gaussian_variance_close_to_nominal():
    # wide truncation of a variance-16 Gaussian, zero offset removed
    k = kernel_gaussian(1, 16.0, 40)
    z = np.arange(-40, 41)
    w = np.exp(-z**2 / 32.0)
    w[40] = 0.0
    assert kernel_variance(k) == pytest.approx(float((z**2 * w).sum() / w.sum()), rel=1e-12)


def test_symbol_nearest_neighbor_values():
    k = kernel_nearest_neighbor(1)
    assert symbol(k, [0.0]) == 0
    assert symbol(k, [math.pi / 2]).real == pytest.approx(-1.0, abs=1e-15)
    assert symbol(k, [math.pi]).real == pytest.approx(-2.0, abs=1e-15)


def test_symbol_grid_fft_order():
    grid = symbol_grid(kernel_nearest_neighbor(1), LatticeSpec(1, 4))
    assert np.allclose(grid.real, [0.0, -1.0, -2.0, -1.0], atol=1e-15)
    assert not np.any(grid.imag)


def test_symbol_dimension_check():
    with pytest.raises(DimensionMismatch):
        symbol(kernel_nearest_neighbor(2), [0.1])


def test_asymmetric_symbol_imaginary_part():
    k = build_kernel(1, [((1,), 0.7), ((-1,), 0.3)], allow_asymmetric=True)
    s = symbol(k, [0.3])
    assert s.real == pytest.approx(math.cos(0.3) - 1.0)
    assert s.imag == pytest.approx(0.4 * math.sin(0.3))


def test_effective_diffusion_scaling():
    k = kernel_nearest_neighbor(1)
    assert effective_diffusion(k, 2.0) == 1.0
    # kappa = kappa_tilde / h^2 holds the continuum coefficient fixed
    for h in (1.0, 0.5, 0.1):
        assert effective_diffusion(k, 2.0 / h**2, h) == pytest.approx(1.0)


def test_lattice_index_wraps():
    lat = LatticeSpec(2, 5)
    assert lat.index((-1, 0)) == lat.index((4, 0))
    assert lat.coords().shape == (25, 2)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.01, 1.0), min_size=1, max_size=4),
    st.lists(st.floats(-math.pi, math.pi), min_size=1, max_size=1),
)
def test_symmetric_symbol_nonpositive_real(raw, k):
    w = np.array(raw) / (2 * sum(raw))
    entries = []
    for j, wj in enumerate(w, start=1):
        entries += [((j,), wj), ((-j,), wj)]
    kern = build_kernel(1, entries)
    s = symbol(kern, k)
    assert s.imag == 0.0
    assert -2.0 - 1e-12 <= s.real <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(2, 9))
def test_symbol_grid_matches_pointwise(d, n):
    kern = kernel_nearest_neighbor(d)
    lat = LatticeSpec(d, n)
    grid = symbol_grid(kern, lat)
    freqs = np.meshgrid(*lat.frequencies(), indexing="ij")
    for j in range(0, lat.size, max(1, lat.size // 7)):
        k = [f.flat[j] for f in freqs]
        assert grid.real.flat[j] == pytest.approx(symbol(kern, k).real, abs=1e-13)


def test_gaussian_variance_four_radius_eight():
    # direct summation oracle over the truncated support
    z = np.arange(-8, 9)
    w = np.exp(-z**2 / 8.0)
    w[8] = 0.0
    ref = float((z**2 * w).sum() / w.sum())
    assert kernel_variance(kernel_gaussian(1, 4.0, 8)) == pytest.approx(ref, rel=1e-13)
    # removing the zero offset shifts mass outward from the nominal 4
    assert ref == pytest.approx(4.994986098, rel=1e-9)
