"""Spectral quadrature on the torus, transition probabilities and Green functions.

On the finite torus ``Z_n^d`` the n-point uniform rule for
``(2 pi)^-d int_{T^d} . dk`` is exact, so every inversion here is a plain
discrete transform.  Closed forms are evaluated in extended precision
(``np.longdouble``) by default so that tiny far-field values keep their
relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import (
    DimensionMismatch,
    EmptyGrid,
    InsufficientPoints,
    TorusSaturated,
    ZeroMobility,
)
from .kernel import LatticeSpec, MobilityKernel, kernel_variance, symbol_values

EXTENDED = np.longdouble


@dataclass(frozen=True)
class TransitionField:
    """``p(t, 0, x)`` for every torus site ``x``, shaped like the lattice."""

    t: float
    lattice: LatticeSpec
    values: np.ndarray

    def at(self, site) -> float:
        return float(self.values.flat[self.lattice.index(site)])


@dataclass(frozen=True)
class GreenResult:
    lam: float
    value: float  # math.inf when the walk is recurrent and lam == 0
    regime: str
    smallk_order: int
    resolutions_used: tuple[int, ...] = ()
    conjectural: bool = False

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "value": "infinite" if math.isinf(self.value) else self.value,
            "regime": self.regime,
            "smallk_order": self.smallk_order,
            "resolutions_used": list(self.resolutions_used),
            "conjectural": self.conjectural,
        }


@lru_cache(maxsize=64)
def _cached_symbol(kernel: MobilityKernel, lattice: LatticeSpec, dtype) -> np.ndarray:
    vals = symbol_values(kernel, lattice, dtype=dtype)
    vals.setflags(write=False)
    return vals


def grid_symbol(kernel: MobilityKernel, lattice: LatticeSpec, extended: bool = True) -> np.ndarray:
    """Cached, read-only symbol array on the lattice frequency grid."""
    return _cached_symbol(kernel, lattice, EXTENDED if extended else np.float64)


def torus_integrate(grid_values) -> complex:
    """Uniform-grid quadrature ``(1/n^d) sum_k g(k)`` of ``(2 pi)^-d int_{T^d} g``."""
    g = np.asarray(grid_values)
    if g.size == 0:
        raise EmptyGrid("cannot integrate over an empty grid")
    if g.ndim not in (1, 2, 3) or len(set(g.shape)) != 1:
        raise DimensionMismatch(f"grid of shape {g.shape} is not an n^d torus grid")
    return complex(g.sum() / g.size)


def inverse_transform(hat: np.ndarray) -> np.ndarray:
    """``f(x) = (1/N) sum_k f^(k) exp(-i k.x)`` over the torus frequency grid."""
    return scipy.fft.fftn(hat) / hat.size


def forward_transform(f: np.ndarray) -> np.ndarray:
    """``f^(k) = sum_x f(x) exp(i k.x)``; inverse of :func:`inverse_transform`."""
    return scipy.fft.ifftn(f) * f.size


def _check(kernel: MobilityKernel, lattice: LatticeSpec):
    if kernel.d != lattice.d:
        raise DimensionMismatch(f"kernel is {kernel.d}-D but lattice is {lattice.d}-D")


def propagator_hat(kernel, kappa, t, lattice, extended=True) -> np.ndarray:
    """``exp(kappa a^(k) t)`` on the frequency grid."""
    _check(kernel, lattice)
    ahat = grid_symbol(kernel, lattice, extended)
    dt = EXTENDED if extended else np.float64
    return np.exp(ahat * dt(kappa) * dt(t))


def _poisson_series(kernel: MobilityKernel, kappa: float, t: float,
                    lattice: LatticeSpec) -> np.ndarray:
    """``sum_j Poisson(j; kappa t) (A^j delta_0)`` in real space.

    Every term is nonnegative, so small far-field probabilities keep full
    relative accuracy.  Terms are added until no site changes by more than
    a relative ``1e-17`` past the Poisson mode.
    """
    _check(kernel, lattice)
    step = kernel.jump_matrix(lattice).T.tocsr() / kernel.mass
    mean = kappa * kernel.mass * t
    walk = np.zeros(lattice.size)
    walk[0] = 1.0
    if mean == 0:
        return walk.reshape(lattice.shape)
    log_mean = math.log(mean)
    acc = np.zeros(lattice.size)
    j = 0
    while True:
        w = math.exp(j * log_mean - mean - math.lgamma(j + 1))
        term = w * walk
        acc += term
        if j > mean:
            live = acc > 0
            if not np.any(term[live] > 1e-17 * acc[live]) and w < 1e-17:
                break
        walk = step @ walk
        j += 1
    return acc.reshape(lattice.shape)


def transition_probability(kernel: MobilityKernel, kappa: float, t: float,
                           lattice: LatticeSpec, extended: bool = True,
                           method: str = "spectral") -> TransitionField:
    """Transition probabilities ``p(t, 0, x)`` of the walk with generator ``kappa L``.

    Parameters
    ----------
    method : {"spectral", "series"}
        ``"spectral"`` inverts ``exp(kappa a^(k) t)`` on the frequency grid;
        its absolute error sits at the working precision.  ``"series"`` sums
        the Poisson-randomised jump chain in real space and keeps relative
        accuracy at every site, at a cost growing with ``kappa t``.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    if method == "spectral":
        vals = inverse_transform(propagator_hat(kernel, kappa, t, lattice, extended)).real
    elif method == "series":
        vals = _poisson_series(kernel, kappa, t, lattice)
    else:
        raise ValueError(f"unknown method {method!r}")
    vals = vals.astype(np.float64)
    vals.setflags(write=False)
    return TransitionField(t=float(t), lattice=lattice, values=vals)


def p00(kernel: MobilityKernel, kappa: float, t: float, lattice: LatticeSpec) -> float:
    """Return probability ``p(t, 0, 0)``; the maximum of ``p(t, x, y)`` for symmetric kernels."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return torus_integrate(propagator_hat(kernel, kappa, t, lattice)).real


def p00_decay_fit(kernel: MobilityKernel, kappa: float, t_grid, lattice: LatticeSpec):
    """Fit ``p(t,0,0) ~ E3 / t**exponent`` by least squares in log-log space.

    The torus must be wide enough that periodic images are negligible at the
    largest time: ``n >= 8 sqrt(kappa sigma^2 t_max)`` in lattice units.

    Returns
    -------
    (amplitude, exponent)
    """
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or t.size < 4:
        raise InsufficientPoints("need at least four times for the decay fit")
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise ValueError("times must be positive and strictly increasing")
    width = 8.0 * math.sqrt(kappa * kernel_variance(kernel) * t[-1])
    values = np.array([p00(kernel, kappa, ti, lattice) for ti in t])
    if lattice.n < width:
        raise TorusSaturated(
            f"n={lattice.n} < {width:.1f}: p(t,0,0) approaches the plateau "
            f"1/n^d = {1.0 / lattice.size:.3g} by t={t[-1]:g}"
        )
    if np.any(values >= 0.5):
        raise ValueError("decay fit needs p(t,0,0) < 0.5 at every time; start later")
    slope, intercept = np.polyfit(np.log(t), np.log(values), 1)
    return math.exp(intercept), -slope


def smallk_order(kernel: MobilityKernel) -> int:
    """Order of the zero of ``a^(k)`` at ``k = 0``.

    Finite-support kernels with zero mean jump vanish quadratically; a
    nonzero drift gives a first-order zero.
    """
    return 1 if np.any(np.abs(kernel.mean()) > 1e-14) else 2


def _punctured_sum(kernel, kappa, n, d) -> float:
    lat = LatticeSpec(d, n)
    ahat = grid_symbol(kernel, lat, extended=False)
    vals = np.asarray(ahat, dtype=np.complex128).copy()
    vals.flat[0] = 1.0  # placeholder, excluded below
    inv = (1.0 / (-kappa * vals)).real
    inv.flat[0] = 0.0
    return float(inv.sum() / lat.size)


def _shifted_sum(kernel, kappa, n, d) -> float:
    """Midpoint rule for ``int Re 1/(-kappa a^(k))`` on a grid that avoids ``k = 0``."""
    k = 2.0 * math.pi * (np.arange(n) + 0.5) / n - math.pi
    axes = np.meshgrid(*([k] * d), indexing="ij", sparse=True)
    ahat = np.full((n,) * d, -kernel.mass, dtype=np.complex128)
    for z, w in zip(kernel.offset_array, kernel.weight_array):
        ahat = ahat + w * np.exp(1j * sum(c * ax for c, ax in zip(z, axes)))
    return float(np.mean((1.0 / (-kappa * ahat)).real))


def _drift_green(kernel, kappa, n, d):
    """``G_0`` for a walk with nonzero mean jump ``m``.

    In one dimension ``Re 1/(lam - kappa a^)`` keeps a point mass
    ``pi delta(k) / (kappa |m|)`` as ``lam -> 0`` which the plain integral
    misses, so ``1 / (2 kappa |m|)`` is added to the midpoint sum.  In
    higher dimensions the integrand has a sharp ridge along ``m.k = 0``; the
    midpoint sums on ``n``, ``2n`` and ``4n`` are Aitken-extrapolated.
    """
    if d == 1:
        drift = abs(float(kernel.mean()[0]))
        return _shifted_sum(kernel, kappa, n, d) + 1.0 / (2.0 * kappa * drift), (n,)
    sizes = (n, 2 * n, 4 * n)
    s1, s2, s3 = (_shifted_sum(kernel, kappa, m, d) for m in sizes)
    d1, d2 = s2 - s1, s3 - s2
    if d2 == d1:
        return s3, sizes
    return s3 - d2 * d2 / (d2 - d1), sizes


def _transient(order: int, d: int) -> bool:
    return order == 1 or d >= 3


def green_function(kernel: MobilityKernel, kappa: float, lam: float,
                   lattice: LatticeSpec) -> GreenResult:
    """Green function ``G_lam(0,0) = int_0^inf exp(-lam t) p(t,0,0) dt``.

    For ``lam > 0`` the value is the exact torus quadrature of
    ``1 / (lam - kappa a^(k))``.  For ``lam = 0`` the regime is decided from
    the small-k order of the symbol.  A centred kernel has
    ``a^(k) ~ -sigma^2 |k|^2 / 2`` so the integrand is integrable iff
    ``d >= 3``; with a drift the real part of ``1 / -a^(k)`` stays bounded
    and the walk is transient in every dimension.  Transient values are
    computed with the ``k = 0`` mode removed on grids ``n`` and ``2n`` and
    Richardson-extrapolated against the leading ``O(1/n)`` error.  Drifted
    walks are handled by :func:`_drift_green`.
    """
    _check(kernel, lattice)
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    order = smallk_order(kernel)
    conj = not kernel.symmetric
    if lam > 0:
        if kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {kappa}")
        ahat = grid_symbol(kernel, lattice, extended=False)
        value = torus_integrate(1.0 / (lam - kappa * ahat)).real
        regime = "transient" if _transient(order, lattice.d) else "recurrent"
        return GreenResult(lam, value, regime, order, (lattice.n,), conj)
    if kappa <= 0:
        raise ZeroMobility("G_0 needs kappa > 0")
    if not _transient(order, lattice.d):
        return GreenResult(0.0, math.inf, "recurrent", order, (), conj)
    n = lattice.n
    if order == 1:
        value, sizes = _drift_green(kernel, kappa, n, lattice.d)
        return GreenResult(0.0, value, "transient", order, sizes, conj)
    coarse = _punctured_sum(kernel, kappa, n, lattice.d)
    fine = _punctured_sum(kernel, kappa, 2 * n, lattice.d)
    value = 2.0 * fine - coarse
    return GreenResult(0.0, value, "transient", order, (n, 2 * n), conj)
