"""Mobility kernels on the integer lattice and their Fourier symbols.

A kernel ``a(z)`` is a jump distribution over nonzero offsets ``z``.  The
diagonal entry is implied: ``a(0) = -sum_{z != 0} a(z)``, so that the
generator ``L f(x) = sum_z a(z) [f(x+z) - f(x)]`` annihilates constants.

All quantities are evaluated on the periodic torus ``Z_n^d``.  Frequencies
follow the FFT ordering ``k_j = 2 pi j / n`` folded into ``[-pi, pi)``, and
the transform convention is ``f^(k) = sum_x f(x) exp(i k.x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
import scipy.fft
import scipy.sparse

from .errors import (
    AsymmetricKernel,
    DegenerateTruncation,
    DimensionMismatch,
    KernelError,
    NegativeWeight,
    NonUnitMass,
    UnsupportedDimension,
    ZeroOffset,
)

MASS_TOL = 1e-12
MAX_SITES = 2**26


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic computational torus ``Z_n^d`` with optional spacing ``h``."""

    d: int
    n: int
    h: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise UnsupportedDimension(f"dimension must be 1, 2 or 3, got {self.d}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"sites per axis must be an integer >= 2, got {self.n}")
        if not self.h > 0:
            raise ValueError(f"lattice spacing must be positive, got {self.h}")
        if self.n**self.d > MAX_SITES:
            raise ValueError(f"torus with {self.n}^{self.d} sites is too large")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    def coords(self) -> np.ndarray:
        """Integer coordinates of every site in C order, shape ``(size, d)``."""
        grids = np.indices(self.shape).reshape(self.d, -1)
        return grids.T.copy()

    def index(self, site) -> int:
        """Flat index of a site given as an int (d=1) or a coordinate tuple."""
        coord = np.atleast_1d(np.asarray(site, dtype=np.int64))
        if coord.shape != (self.d,):
            raise DimensionMismatch(f"site {site!r} does not have {self.d} coordinates")
        return int(np.ravel_multi_index(tuple(coord % self.n), self.shape))

    def frequencies(self, dtype=np.float64) -> list[np.ndarray]:
        """Per-axis frequency grids in FFT order, folded into ``[-pi, pi)``."""
        j = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(dtype)
        two_pi = 2 * np.arccos(dtype(-1))
        return [two_pi * j / self.n for _ in range(self.d)]


@dataclass(frozen=True)
class MobilityKernel:
    """Validated jump distribution on ``Z^d \\ {0}``.

    Use :func:`build_kernel` or one of the presets rather than constructing
    this directly.
    """

    d: int
    offsets: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]
    symmetric: bool
    _lookup: dict = field(default=None, repr=False, compare=False, hash=False)

    @cached_property
    def offset_array(self) -> np.ndarray:
        arr = np.array(self.offsets, dtype=np.int64).reshape(-1, self.d)
        arr.setflags(write=False)
        return arr

    @cached_property
    def weight_array(self) -> np.ndarray:
        arr = np.array(self.weights, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def conjectural(self) -> bool:
        """Results derived for an asymmetric kernel are only conjectured."""
        return not self.symmetric

    def weight(self, offset) -> float:
        """``a(offset)``; zero outside the support and at the origin."""
        key = tuple(int(c) for c in np.atleast_1d(offset))
        if len(key) != self.d:
            raise DimensionMismatch(f"offset {offset!r} is not {self.d}-dimensional")
        return self._lookup.get(key, 0.0)

    def mean(self) -> np.ndarray:
        """Mean jump vector ``sum_z z a(z)``."""
        return self.weight_array @ self.offset_array

    def torus_weights(self, lattice: LatticeSpec, diagonal: bool = True) -> np.ndarray:
        """Kernel wrapped onto the torus as an array of ``lattice.shape``.

        With ``diagonal`` the implied ``a(0) = -mass`` is included, so the
        array sums to zero.
        """
        _check_dim(self, lattice)
        out = np.zeros(lattice.shape, dtype=np.float64)
        idx = tuple((self.offset_array % lattice.n).T)
        np.add.at(out, idx, self.weight_array)
        if diagonal:
            out[(0,) * lattice.d] -= self.mass
        return out

    def jump_matrix(self, lattice: LatticeSpec) -> scipy.sparse.csr_matrix:
        """Sparse ``J`` with ``J[x, x+z] = a(z)`` on the torus (no diagonal)."""
        _check_dim(self, lattice)
        coords = lattice.coords()
        rows, cols, vals = [], [], []
        for z, w in zip(self.offset_array, self.weight_array):
            dest = np.ravel_multi_index(tuple(((coords + z) % lattice.n).T), lattice.shape)
            rows.append(np.arange(lattice.size))
            cols.append(dest)
            vals.append(np.full(lattice.size, w))
        J = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(lattice.size, lattice.size),
        )
        return J.tocsr()


@dataclass(frozen=True)
class FourierSymbol:
    """Symbol values on the full frequency grid of a lattice (FFT order)."""

    lattice: LatticeSpec
    real: np.ndarray
    imag: np.ndarray

    @property
    def values(self) -> np.ndarray:
        if not np.any(self.imag):
            return self.real
        return self.real + 1j * self.imag


def _check_dim(kernel: MobilityKernel, lattice: LatticeSpec):
    if kernel.d != lattice.d:
        raise DimensionMismatch(f"kernel is {kernel.d}-D but lattice is {lattice.d}-D")


def _as_offset(offset, d: int) -> tuple[int, ...]:
    coord = tuple(np.atleast_1d(np.asarray(offset)).tolist())
    if len(coord) != d:
        raise DimensionMismatch(f"offset {offset!r} is not {d}-dimensional")
    if any(int(c) != c for c in coord):
        raise KernelError(f"offset {offset!r} is not integer")
    return tuple(int(c) for c in coord)


def build_kernel(d: int, entries, allow_asymmetric: bool = False) -> MobilityKernel:
    """Validate ``(offset, weight)`` pairs into a :class:`MobilityKernel`.

    Weights are not renormalized: the nonzero-offset mass must equal one to
    within ``1e-12``.  Asymmetric kernels are rejected unless
    ``allow_asymmetric`` is set; anything computed from them is conjectural.

    Raises
    ------
    ZeroOffset, NegativeWeight, NonUnitMass, AsymmetricKernel
    """
    if d not in (1, 2, 3):
        raise UnsupportedDimension(f"dimension must be 1, 2 or 3, got {d}")
    entries = list(entries)
    if not entries:
        raise KernelError("kernel needs at least one (offset, weight) entry")
    lookup: dict[tuple[int, ...], float] = {}
    for offset, weight in entries:
        z = _as_offset(offset, d)
        if not any(z):
            raise ZeroOffset("the origin cannot carry jump weight; a(0) is implied")
        if z in lookup:
            raise KernelError(f"duplicate offset {z}")
        w = float(weight)
        if not math.isfinite(w) or w < 0:
            raise NegativeWeight(f"weight {w} at offset {z} is negative or not finite")
        lookup[z] = w
    mass = math.fsum(lookup.values())
    if abs(mass - 1.0) > MASS_TOL:
        raise NonUnitMass(f"weights over nonzero offsets sum to {mass!r}, not 1")
    symmetric = all(lookup.get(tuple(-c for c in z), 0.0) == w for z, w in lookup.items())
    if not symmetric and not allow_asymmetric:
        raise AsymmetricKernel("a(z) != a(-z); pass allow_asymmetric=True to build it anyway")
    offsets = tuple(sorted(lookup))
    return MobilityKernel(
        d=d,
        offsets=offsets,
        weights=tuple(lookup[z] for z in offsets),
        symmetric=symmetric,
        _lookup=lookup,
    )


def kernel_nearest_neighbor(d: int) -> MobilityKernel:
    """Simple random walk: weight ``1/(2d)`` on each unit offset."""
    if d not in (1, 2, 3):
        raise UnsupportedDimension(f"dimension must be 1, 2 or 3, got {d}")
    entries = []
    for axis in range(d):
        for sign in (1, -1):
            z = [0] * d
            z[axis] = sign
            entries.append((tuple(z), 1.0 / (2 * d)))
    return build_kernel(d, entries)


def kernel_gaussian(d: int, variance: float, radius: int) -> MobilityKernel:
    """Discrete product-Gaussian on ``[-radius, radius]^d \\ {0}``, renormalized.

    Weights are formed in log space so that very small variances still put
    their mass on the nearest offsets instead of underflowing.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    if int(radius) != radius or radius < 1:
        raise DegenerateTruncation(f"radius {radius} leaves no nonzero offset")
    radius = int(radius)
    offsets = [z for z in product(range(-radius, radius + 1), repeat=d) if any(z)]
    z2 = np.array([sum(c * c for c in z) for z in offsets], dtype=np.float64)
    logw = -z2 / (2.0 * variance)
    w = np.exp(logw - logw.max())
    total = math.fsum(w)
    if not (total > 0 and math.isfinite(total)):
        raise DegenerateTruncation("truncated Gaussian has no mass off the origin")
    w = w / total
    return build_kernel(d, zip(offsets, w.tolist()))


def symbol(kernel: MobilityKernel, k) -> complex:
    """``a^(k) = sum_z a(z) exp(i k.z)`` including the implied ``a(0)``."""
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))
    if k.shape != (kernel.d,):
        raise DimensionMismatch(f"frequency {k!r} is not {kernel.d}-dimensional")
    phase = kernel.offset_array @ k
    re = math.fsum((kernel.weight_array * np.cos(phase)).tolist()) - kernel.mass
    if kernel.symmetric:
        return complex(re, 0.0)
    im = math.fsum((kernel.weight_array * np.sin(phase)).tolist())
    return complex(re, im)


def symbol_values(kernel: MobilityKernel, lattice: LatticeSpec, dtype=np.float64) -> np.ndarray:
    """Symbol on the lattice frequency grid as a plain array.

    Real for symmetric kernels, complex otherwise.  ``dtype`` may be
    ``np.longdouble`` for extended-precision evaluation.
    """
    _check_dim(kernel, lattice)
    wrapped = kernel.torus_weights(lattice, diagonal=True).astype(dtype)
    # sum_x a(x) exp(+i k.x) is N * ifft in numpy's sign convention
    vals = scipy.fft.ifftn(wrapped) * lattice.size
    origin = (0,) * lattice.d
    if kernel.symmetric:
        vals = vals.real.copy()
        vals[origin] = 0
    else:
        vals = vals.copy()
        vals[origin] = 0
    return vals


def symbol_grid(kernel: MobilityKernel, lattice: LatticeSpec) -> FourierSymbol:
    """Evaluate the symbol at all ``n^d`` torus frequencies."""
    vals = symbol_values(kernel, lattice)
    if np.iscomplexobj(vals):
        real, imag = vals.real.copy(), vals.imag.copy()
    else:
        real, imag = vals, np.zeros_like(vals)
    real.setflags(write=False)
    imag.setflags(write=False)
    return FourierSymbol(lattice=lattice, real=real, imag=imag)


def kernel_variance(kernel: MobilityKernel) -> float:
    """Second moment ``sigma^2 = sum_z |z|^2 a(z)``."""
    z2 = np.sum(kernel.offset_array**2, axis=1)
    return math.fsum((z2 * kernel.weight_array).tolist())


def effective_diffusion(kernel: MobilityKernel, kappa: float, h: float = 1.0) -> float:
    """Continuum-limit diffusion coefficient ``kappa h^2 sigma^2 / 2``.

    Keeping ``kappa = kappa_tilde / h**2`` fixes the coefficient as ``h -> 0``.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    if not h > 0:
        raise ValueError(f"spacing must be positive, got {h}")
    return kappa * h * h * kernel_variance(kernel) / 2.0
