"""First moments of the linear lattice SIR system.

The mean fields ``m1_S``, ``m1_I`` and ``m1_R`` of an epidemic started by a
single infective at the origin in a uniform susceptible background obey the
linear system

    d/dt m1_S = kappa L m1_S - beta m1_I
    d/dt m1_I = kappa L m1_I + (beta - gamma) m1_I
    d/dt m1_R = kappa L m1_R + gamma m1_I

with ``(L f)(x) = sum_z a(z) f(x - z)`` and the convention ``a(0) = -mass``.
In Fourier space ``L`` is multiplication by the symbol ``a^(k)``, so the
system decouples mode by mode and is inverted exactly on the torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.integrate import solve_ivp

from .errors import DimensionMismatch, IntegratorFailure, NegativeTime, ZeroRecovery
from .kernel import LatticeSpec, MobilityKernel, symbol
from .torus import EXTENDED, grid_symbol, inverse_transform, transition_probability

COMPARTMENTS = ("S", "I", "R")
DIAGONAL_TOL = 1e-12
SIGN_TOL = 1e-12


@dataclass(frozen=True)
class Rates:
    """Per-particle rates and the initial susceptible level.

    Parameters
    ----------
    kappa : float
        Total jump rate of each particle.
    beta, gamma : float
        Infection and recovery rates.
    rho0 : float
        Initial number of susceptibles per site.
    """

    kappa: float
    beta: float
    gamma: float
    rho0: float = 1.0

    def __post_init__(self):
        for name in ("kappa", "beta", "gamma", "rho0"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")
        if self.rho0 <= 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")

    @property
    def growth(self) -> float:
        """Net per-capita growth rate ``beta - gamma`` of the infectives."""
        return self.beta - self.gamma

    @property
    def balanced(self) -> bool:
        """True when ``beta`` and ``gamma`` are equal to relative ``1e-12``."""
        return abs(self.beta - self.gamma) <= DIAGONAL_TOL * max(self.beta, self.gamma)


@dataclass(frozen=True)
class MomentField:
    """A first-moment field on the torus for one compartment."""

    t: float
    compartment: str
    lattice: LatticeSpec
    values: np.ndarray
    conjectural: bool = False

    def at(self, site) -> float:
        return float(self.values.flat[self.lattice.index(site)])

    @property
    def total(self) -> float:
        return math.fsum(self.values.ravel().tolist())

    @property
    def negative_sites(self) -> np.ndarray:
        """Flat indices where the field is below zero."""
        return np.flatnonzero(self.values.ravel() < 0)


@dataclass(frozen=True)
class RegimeReport:
    """Sign-based regime of ``m1_I`` at one frequency."""

    k: tuple
    alpha: float
    theta: float
    mu: float
    r0: float
    r0m: float
    label: str
    conjectural: bool = False

    def to_dict(self) -> dict:
        return {
            "k": list(self.k), "alpha": self.alpha, "theta": self.theta, "mu": self.mu,
            "R0": self.r0, "R0m": self.r0m, "label": self.label,
            "conjectural": self.conjectural,
        }


def _growth_integral(c, t):
    """``(exp(c t) - 1) / c`` with the ``c -> 0`` limit ``t``."""
    if c == 0:
        return t
    return math.expm1(c * t) / c


def m1_homogeneous(rates: Rates, t: float, target: str, at_origin: bool = True) -> float:
    """First moment of one compartment without spatial coupling.

    Parameters
    ----------
    rates : Rates
    t : float
        Time, nonnegative.
    target : {"S", "I", "R"}
    at_origin : bool
        Whether the site is the one holding the initial infective.

    Returns
    -------
    float
    """
    if t < 0:
        raise NegativeTime(f"t must be nonnegative, got {t}")
    if target not in COMPARTMENTS:
        raise ValueError(f"target must be one of {COMPARTMENTS}, got {target!r}")
    delta = 1.0 if at_origin else 0.0
    c = 0.0 if rates.balanced else rates.growth
    if target == "I":
        return delta * math.exp(c * t)
    g = _growth_integral(c, t)
    if target == "R":
        return delta * rates.gamma * g
    return rates.rho0 - delta * rates.beta * g


def _growth_integral_grid(c: float, t: float, dtype):
    if c == 0:
        return dtype(t)
    return np.expm1(dtype(c) * dtype(t)) / dtype(c)


def m1_inhomogeneous(kernel: MobilityKernel, rates: Rates, t: float, lattice: LatticeSpec,
                     method: str = "spectral") -> tuple[MomentField, MomentField, MomentField]:
    """Spectral solution for ``(m1_S, m1_I, m1_R)`` on the torus.

    Each mode evolves independently: ``m1_I^ = exp((kappa a^ + c) t)``,
    ``m1_R^ = gamma exp(kappa a^ t) (exp(c t) - 1) / c`` and
    ``m1_S^ = rho0 N delta_{k,0} - beta exp(kappa a^ t) (exp(c t) - 1) / c``
    with ``c = beta - gamma`` (``t`` in place of the ratio when ``c = 0``).
    The uniform part of the initial susceptibles lives only in the zero mode.
    Evaluated in extended precision.

    With ``method="series"`` the same solution is assembled in real space
    from ``p(t, 0, x)`` summed as a positive series, which keeps relative
    accuracy at sites where the fields are far below the working precision
    of the transform.
    """
    if t < 0:
        raise NegativeTime(f"t must be nonnegative, got {t}")
    if kernel.d != lattice.d:
        raise DimensionMismatch(f"kernel is {kernel.d}-D but lattice is {lattice.d}-D")
    if method == "series":
        return _m1_from_walk(kernel, rates, t, lattice)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    ahat = grid_symbol(kernel, lattice, extended=True)
    c = 0.0 if rates.balanced else rates.growth
    diffuse = np.exp(ahat * EXTENDED(rates.kappa) * EXTENDED(t))
    grown = _growth_integral_grid(c, t, EXTENDED)
    hat_i = diffuse * np.exp(EXTENDED(c) * EXTENDED(t))
    hat_r = diffuse * grown * EXTENDED(rates.gamma)
    hat_s = -diffuse * grown * EXTENDED(rates.beta)
    hat_s = hat_s.astype(np.result_type(hat_s, np.clongdouble))
    hat_s[(0,) * lattice.d] += EXTENDED(rates.rho0) * lattice.size

    conj = not kernel.symmetric
    out = []
    for name, hat in zip(COMPARTMENTS, (hat_s, hat_i, hat_r)):
        vals = inverse_transform(hat).real.astype(np.float64)
        vals.setflags(write=False)
        out.append(MomentField(float(t), name, lattice, vals, conj))
    return tuple(out)


def _m1_from_walk(kernel, rates, t, lattice):
    p = transition_probability(kernel, rates.kappa, t, lattice, method="series").values
    c = 0.0 if rates.balanced else rates.growth
    g = _growth_integral(c, t)
    fields = (rates.rho0 - rates.beta * g * p, math.exp(c * t) * p, rates.gamma * g * p)
    out = []
    for name, vals in zip(COMPARTMENTS, fields):
        vals.setflags(write=False)
        out.append(MomentField(float(t), name, lattice, vals, not kernel.symmetric))
    return tuple(out)


def generator_matrix(kernel: MobilityKernel, kappa: float, lattice: LatticeSpec):
    """Sparse matrix of ``kappa L`` acting on flattened torus fields."""
    J = kernel.jump_matrix(lattice)
    eye = scipy.sparse.identity(lattice.size, format="csr")
    return (kappa * (J.T - kernel.mass * eye)).tocsr()


def m1_ode_oracle(kernel: MobilityKernel, rates: Rates, t: float, lattice: LatticeSpec,
                  rtol: float = 1e-13, atol: float = 1e-30):
    """Integrate the first-moment system directly in real space.

    Uses an adaptive eighth-order Runge-Kutta scheme on the ``3 N``
    dimensional linear system.  Independent of the Fourier machinery.
    """
    if t < 0:
        raise NegativeTime(f"t must be nonnegative, got {t}")
    if kernel.d != lattice.d:
        raise DimensionMismatch(f"kernel is {kernel.d}-D but lattice is {lattice.d}-D")
    N = lattice.size
    K = generator_matrix(kernel, rates.kappa, lattice)
    beta, gamma = rates.beta, rates.gamma

    def rhs(_, y):
        s, i, r = y[:N], y[N:2 * N], y[2 * N:]
        return np.concatenate([K @ s - beta * i, K @ i + (beta - gamma) * i, K @ r + gamma * i])

    y0 = np.zeros(3 * N)
    y0[:N] = rates.rho0
    y0[N] = 1.0
    if t == 0:
        y = y0
    else:
        sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise IntegratorFailure(sol.message)
        y = sol.y[:, -1]
    conj = not kernel.symmetric
    fields = []
    for j, name in enumerate(COMPARTMENTS):
        vals = y[j * N:(j + 1) * N].reshape(lattice.shape).copy()
        vals.setflags(write=False)
        fields.append(MomentField(float(t), name, lattice, vals, conj))
    return tuple(fields)


def reproduction_numbers(kernel: MobilityKernel, rates: Rates, lattice: LatticeSpec):
    """Basic and mobility-modified reproduction numbers.

    Returns
    -------
    r0 : float
        ``beta / gamma``.
    r0m_grid : ndarray
        ``(kappa Re a^(k) + beta) / gamma`` on the lattice frequency grid.
    r0m_max : float
        Maximum of the grid, ``r0 + (kappa / gamma) max_k Re a^(k)``.
    """
    if rates.gamma == 0:
        raise ZeroRecovery("reproduction numbers need gamma > 0")
    re = np.asarray(grid_symbol(kernel, lattice, extended=False)).real.astype(np.float64)
    r0 = rates.beta / rates.gamma
    grid = (rates.kappa * re + rates.beta) / rates.gamma
    r0m_max = r0 + rates.kappa / rates.gamma * float(re.max())
    return r0, grid, r0m_max


def _sign(x: float, scale: float) -> int:
    if abs(x) <= SIGN_TOL * max(scale, 1.0):
        return 0
    return 1 if x > 0 else -1


def classify_first_moment(kernel: MobilityKernel, rates: Rates, k) -> RegimeReport:
    """Long-time regime of the mode ``k`` of ``m1_I``.

    ``theta < 0`` vanishes, ``theta = 0`` holds steady at the initial delta,
    ``theta > 0`` grows: only at the origin when ``alpha = 0`` and everywhere
    when ``alpha < 0``.  For asymmetric kernels the real part of the symbol
    decides and the report is flagged conjectural.
    """
    if rates.gamma == 0:
        raise ZeroRecovery("classification needs gamma > 0")
    kv = tuple(float(v) for v in np.atleast_1d(k))
    a = symbol(kernel, kv).real
    alpha = rates.kappa * a
    theta = alpha + rates.beta - rates.gamma
    mu = alpha + rates.beta + rates.gamma
    scale = rates.kappa * kernel.mass + rates.beta + rates.gamma
    s_theta = _sign(theta, scale)
    if s_theta < 0:
        label = "vanish"
    elif s_theta == 0:
        label = "steady_delta"
    elif _sign(alpha, rates.kappa * kernel.mass) == 0:
        label = "grow_origin_only"
    else:
        label = "grow_everywhere"
    return RegimeReport(kv, alpha, theta, mu, rates.beta / rates.gamma,
                        (alpha + rates.beta) / rates.gamma, label, not kernel.symmetric)


def classify_homogeneous_first_moment(rates: Rates) -> str:
    """``vanish``, ``steady`` or ``grow`` from the sign of ``beta - gamma``."""
    if rates.balanced:
        return "steady"
    return "grow" if rates.growth > 0 else "vanish"
