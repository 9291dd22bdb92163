"""Intermittency ratios ``m2 / m1^2`` and their long-time classification.

A field is intermittent when the same-site ratio
``E[I(t,x)^2] / E[I(t,x)]^2`` grows without bound: the mass of the
infected field concentrates on rare, high peaks.  Without spatial coupling
the ratios have closed forms.  With mobility they are assembled from the
moment modules and their growth is judged along a geometric time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeTime, VanishingMean, ZeroSeparation
from .first_moments import Rates, _growth_integral
from .kernel import LatticeSpec, MobilityKernel, kernel_variance
from .second_moments import m2_inhomogeneous
from .torus import transition_probability

SPACES = ("homogeneous", "inhomogeneous")
GRID_POINTS = 11
GROWTH_FACTOR = 2.0
MONOTONE_TAIL = 4
VANISHING = 1e-300


@dataclass(frozen=True)
class IntermittencyReport:
    """Ratio series on a geometric time grid and the inferred limit.

    ``limit_label`` is ``"intermittent"`` or ``"bounded"``.  When bounded,
    ``limit_value`` is the same-site limit (``E1``) and ``pair_limit`` the
    pair limit (``E2``).  ``t_star`` marks where the same-site series becomes
    monotone for good.
    """

    space: str
    times: tuple
    ratio_same_site: tuple
    ratio_pair: tuple
    v: tuple | None
    limit_label: str
    limit_value: float | None = None
    pair_limit: float | None = None
    t_star: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "space": self.space, "v": None if self.v is None else list(self.v),
            "limit_label": self.limit_label, "limit_value": _json_float(self.limit_value),
            "pair_limit": _json_float(self.pair_limit), "t_star": self.t_star,
            "notes": list(self.notes),
        }


def _json_float(x):
    if x is None:
        return None
    if math.isinf(x):
        return "infinite" if x > 0 else "-infinite"
    return x


def _check(t, space):
    if t < 0:
        raise NegativeTime(f"t must be nonnegative, got {t}")
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}, got {space!r}")


def _decay_integral(c: float, t: float) -> float:
    """``(exp(-c t) - 1) / -c``, equal to ``t`` at ``c = 0``."""
    return _growth_integral(-c, t)


def _site(x, d):
    return (0,) * d if x is None else tuple(int(c) for c in np.atleast_1d(x))


def _walk_at(kernel, kappa, t, lattice, sites):
    p = transition_probability(kernel, kappa, t, lattice)
    vals = [p.at(s) for s in sites]
    if min(vals) < VANISHING:
        raise VanishingMean(f"m1_I vanishes at t={t:g}; the ratio is undefined")
    return vals


def default_lattice(kernel: MobilityKernel, kappa: float, t_max: float) -> LatticeSpec:
    """Smallest power-of-two torus on which the walk has not wrapped by ``t_max``."""
    width = 8.0 * math.sqrt(max(kappa * kernel_variance(kernel) * t_max, 1.0))
    n = 16
    while n < width:
        n *= 2
    return LatticeSpec(kernel.d, n)


def ratio_same_site(rates: Rates, t: float, space: str = "homogeneous",
                    kernel: MobilityKernel | None = None, lattice: LatticeSpec | None = None,
                    x=None) -> float:
    """Same-site ratio ``m2_I(t, x, x) / m1_I(t, x)^2``.

    Homogeneous: ``rho0 + (beta + gamma + 2 kappa) (exp(-ct) - 1) / -c``.
    Inhomogeneous: the pair moment of an epidemic started at the origin
    divided by the squared mean, both on ``lattice``.
    """
    _check(t, space)
    c = 0.0 if rates.balanced else rates.growth
    if space == "homogeneous":
        src = rates.beta + rates.gamma + 2.0 * rates.kappa
        return rates.rho0 + src * _decay_integral(c, t)
    if kernel is None:
        raise ValueError("inhomogeneous ratio needs a kernel")
    lattice = lattice or default_lattice(kernel, rates.kappa, t)
    x = _site(x, lattice.d)
    (px,) = _walk_at(kernel, rates.kappa, t, lattice, [x])
    m2 = m2_inhomogeneous(kernel, rates, t, lattice, kind="same_site", x=x)
    return m2.scaled / (px * px)


def ratio_pair(rates: Rates, kernel: MobilityKernel, v, t: float, space: str = "homogeneous",
               lattice: LatticeSpec | None = None, x=None) -> float:
    """Pair ratio ``m2_I(t, x, x+v) / (m1_I(t, x) m1_I(t, x+v))``.

    Homogeneous: ``rho0 + 2 kappa a(v) (exp(-ct) - 1) / c``.
    """
    _check(t, space)
    v = tuple(int(c) for c in np.atleast_1d(v))
    if all(c == 0 for c in v):
        raise ZeroSeparation("pair ratio needs a nonzero separation")
    c = 0.0 if rates.balanced else rates.growth
    if space == "homogeneous":
        return rates.rho0 - 2.0 * rates.kappa * kernel.weight(v) * _decay_integral(c, t)
    lattice = lattice or default_lattice(kernel, rates.kappa, t)
    x = _site(x, lattice.d)
    y = tuple(a + b for a, b in zip(x, v))
    px, py = _walk_at(kernel, rates.kappa, t, lattice, [x, y])
    m2 = m2_inhomogeneous(kernel, rates, t, lattice, kind="pair", v=v, x=x)
    return m2.scaled / (px * py)


def printed_ratio_same_site(rates: Rates, kernel: MobilityKernel, t: float,
                            lattice: LatticeSpec, x=None) -> float:
    """Historical closed-form expression for the same-site ratio with mobility.

    ``rho0/p + kappa (e^{3ct} - 1) / (3c p^2) + (beta+gamma+2 kappa)(e^{3ct} - 1) / (3c p)``
    with ``p = p(t, 0, x)``.  It is not an identity of the moment system and
    is kept for comparison only.
    """
    _check(t, "inhomogeneous")
    (p,) = _walk_at(kernel, rates.kappa, t, lattice, [_site(x, lattice.d)])
    c = 0.0 if rates.balanced else rates.growth
    g = _growth_integral(3 * c, t)
    src = rates.beta + rates.gamma + 2.0 * rates.kappa
    return rates.rho0 / p + rates.kappa * g / p**2 + src * g / p


def printed_ratio_pair(rates: Rates, kernel: MobilityKernel, v, t: float,
                       lattice: LatticeSpec) -> float:
    """Historical closed-form pair ratio ``rho0/p - 2 kappa a(v) (e^{3ct} - 1) / (3c p)``.

    Here ``p = p(t, 0, v)``.  Kept for comparison only.
    """
    _check(t, "inhomogeneous")
    v = tuple(int(c) for c in np.atleast_1d(v))
    (p,) = _walk_at(kernel, rates.kappa, t, lattice, [v])
    c = 0.0 if rates.balanced else rates.growth
    g = _growth_integral(3 * c, t)
    return rates.rho0 / p - 2.0 * rates.kappa * kernel.weight(v) * g / p


def witness_grid(rates: Rates, points: int = GRID_POINTS) -> np.ndarray:
    """Geometric grid ``2^j / (|beta - gamma| + kappa + 1)``, ``j = 0..points-1``."""
    scale = abs(rates.beta - rates.gamma) + rates.kappa + 1.0
    return np.array([2.0**j for j in range(points)]) / scale


def _monotone_start(series, increasing: bool) -> int:
    """Index where the final monotone run of ``series`` begins."""
    j = len(series) - 1
    while j > 0:
        a, b = series[j - 1], series[j]
        ok = (b >= a) if increasing else (b <= a)
        if not ok:
            break
        j -= 1
    return j


def grows_without_bound(series) -> bool:
    """Numerical witness of divergence on a geometric grid.

    The series must be nondecreasing over its last four points and its final
    value must be at least twice the value three doublings earlier.
    Overflow to infinity counts as divergence.
    """
    s = np.asarray(series, dtype=np.float64)
    if np.isinf(s[-1]) and s[-1] > 0:
        return True
    tail = s[-MONOTONE_TAIL:]
    if np.any(np.diff(tail) < 0):
        return False
    base = s[-MONOTONE_TAIL]
    return base > 0 and s[-1] >= GROWTH_FACTOR * base


def classify_intermittency(rates: Rates, kernel: MobilityKernel | None = None,
                           space: str = "homogeneous", lattice: LatticeSpec | None = None,
                           v=None, points: int = GRID_POINTS) -> IntermittencyReport:
    """Decide whether the infected field is intermittent.

    Homogeneous space is decided analytically: intermittent iff
    ``beta <= gamma``, otherwise bounded with limits ``E1`` and ``E2``.
    Inhomogeneous space is decided from the same-site ratio at the origin
    on :func:`witness_grid` by :func:`grows_without_bound`.
    """
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}, got {space!r}")
    times = witness_grid(rates, points)
    if kernel is not None and v is None:
        v = tuple(int(c) for c in kernel.offset_array[0])
    if space == "inhomogeneous" and kernel is None:
        raise ValueError("inhomogeneous classification needs a kernel")
    if space == "inhomogeneous" and lattice is None:
        lattice = default_lattice(kernel, rates.kappa, float(times[-1]))

    same, pair = [], []
    for t in times:
        try:
            same.append(ratio_same_site(rates, t, space, kernel, lattice))
        except VanishingMean:
            same.append(math.inf)
        if v is not None:
            try:
                pair.append(ratio_pair(rates, kernel, v, t, space, lattice))
            except VanishingMean:
                pair.append(math.inf)
    notes = []
    if space == "homogeneous":
        c = rates.beta - rates.gamma
        intermittent = c <= 0 or rates.balanced
        e1 = e2 = None
        if not intermittent:
            e1 = rates.rho0 + (rates.beta + rates.gamma + 2.0 * rates.kappa) / c
            if v is not None:
                e2 = rates.rho0 - 2.0 * rates.kappa * kernel.weight(v) / c
        elif v is not None and kernel.weight(v) > 0:
            notes.append("pair ratio diverges to -infinity")
    else:
        intermittent = grows_without_bound(same)
        e1 = None if intermittent else float(same[-1])
        e2 = None if intermittent or not pair else float(pair[-1])
        notes.append(f"witness on n={lattice.n} torus, last ratio {same[-1]:.6g}")
    start = _monotone_start(same, increasing=intermittent or same[-1] >= same[-2])
    t_star = float(times[start])
    return IntermittencyReport(
        space, tuple(float(t) for t in times), tuple(same), tuple(pair),
        None if v is None else tuple(v), "intermittent" if intermittent else "bounded",
        e1, e2, t_star, notes,
    )
