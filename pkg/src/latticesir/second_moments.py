"""Second moments of the infected field and the full pair-moment system.

Writing ``M(t, x, y) = E[I(t, x) I(t, y)]`` and ``K = kappa L`` acting on
one site index, the infected pair moment solves

    dM/dt = K_x M + K_y M + 2 c M + Q(t)

with ``c = beta - gamma`` and a source ``Q`` built from the first moment
``m = m1_I``:

    Q(x, y) = delta_{xy} [kappa (A m + m)(x) + (beta + gamma) m(x)]
              - kappa [m(x) a(y - x) + m(y) a(x - y)]

where ``(A m)(x) = sum_z a(z) m(x - z)``.  The diagonal term is the noise of
single jumps and reactions at one site; the off-diagonal term is the
anticorrelation created when a particle leaves ``x`` for ``y``.

Three evaluators are provided.  ``"duhamel"`` integrates the variation of
constants formula by adaptive Gauss-Legendre quadrature in the source time,
``"spectral"`` uses the exact two-frequency solution, and ``"printed"``
evaluates the historical closed-form matrix expressions, which do not solve
the system and are kept only to measure that disagreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.integrate import solve_ivp

from .errors import (
    DimensionMismatch,
    IntegratorFailure,
    NegativeTime,
    QuadratureStall,
    SystemTooLarge,
    ZeroSeparation,
)
from .first_moments import Rates, SIGN_TOL, _growth_integral, generator_matrix
from .kernel import LatticeSpec, MobilityKernel, symbol
from .torus import grid_symbol, inverse_transform

MAX_PAIRS = 4096
QUAD_RTOL = 1e-8
GL_ORDER = 8
MAX_PANELS = 4096
INITIAL_DATA = ("delta", "uniform")
PAIR_BLOCKS = ("II", "SS", "RR", "SI", "RI")


@dataclass(frozen=True)
class PairMoment:
    """``E[X(t, x) Y(t, y)]`` for one pair of sites.

    ``v`` is the separation ``y - x`` (all zeros for ``kind="same_site"``).
    """

    t: float
    kind: str
    v: tuple
    value: float
    compartments: str = "II"
    x: tuple | None = None
    scaled: float | None = None  # value * exp(-2 (beta - gamma) t)

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, "v": list(self.v), "value": self.value,
                "compartment_pair": self.compartments}


@dataclass(frozen=True)
class SecondMomentRegime:
    """Long-time labels for ``m2_I`` at one frequency.

    Labels take values ``"infinity"``, ``"zero"``, ``"delta"`` (limit
    ``delta_0``), ``"scaled_delta"``, ``"infeasible"`` or ``"unclassified"``.
    """

    k: tuple
    alpha: float
    theta: float
    mu: float
    homogeneous_same_site: str
    homogeneous_pair: str
    same_site: str
    pair: str
    row: int | None
    feasible: bool
    conjectural: bool = False

    def to_dict(self) -> dict:
        return {
            "k": list(self.k), "alpha": self.alpha, "theta": self.theta, "mu": self.mu,
            "homogeneous": {"same_site": self.homogeneous_same_site,
                            "pair": self.homogeneous_pair},
            "inhomogeneous": {"same_site": self.same_site, "pair": self.pair},
            "row": self.row, "feasible": self.feasible, "conjectural": self.conjectural,
        }


def _check_time(t):
    if t < 0:
        raise NegativeTime(f"t must be nonnegative, got {t}")


def _rate(rates: Rates) -> float:
    return 0.0 if rates.balanced else rates.growth


def m2_homogeneous_same_site(rates: Rates, t: float) -> float:
    """Same-site second moment of a spatially uniform infected field.

    ``rho0 exp(2ct) + (beta + gamma + 2 kappa) exp(ct) (exp(ct) - 1) / c``
    with ``c = beta - gamma``; ``rho0 + (beta + gamma + 2 kappa) t`` when
    ``c = 0``.  Within this model the spatial operator acting on the pair
    moment is dropped, which is exact only for ``kappa = 0``.
    """
    _check_time(t)
    c = _rate(rates)
    src = rates.beta + rates.gamma + 2.0 * rates.kappa
    return rates.rho0 * math.exp(2 * c * t) + src * math.exp(c * t) * _growth_integral(c, t)


def m2_homogeneous_pair(rates: Rates, kernel: MobilityKernel, v, t: float) -> float:
    """Pair moment at separation ``v != 0`` of a spatially uniform field.

    ``rho0 exp(2ct) - 2 kappa a(v) exp(ct) (exp(ct) - 1) / c``, with the
    ``c = 0`` limit ``rho0 - 2 kappa a(v) t``.
    """
    _check_time(t)
    v = tuple(int(c) for c in np.atleast_1d(v))
    if all(c == 0 for c in v):
        raise ZeroSeparation("pair moment needs a nonzero separation")
    c = _rate(rates)
    av = kernel.weight(v)
    return rates.rho0 * math.exp(2 * c * t) - 2.0 * rates.kappa * av * math.exp(c * t) * _growth_integral(c, t)


# --- Duhamel quadrature -------------------------------------------------------

def _walk_fields(ahat, kappa, times, jump_hat=None):
    """Real-space ``p(t_i, 0, .)`` (or ``A p``) for a batch of times."""
    d = ahat.ndim
    hat = np.exp(np.multiply.outer(np.asarray(times, dtype=np.float64) * kappa, ahat))
    if jump_hat is not None:
        hat = hat * jump_hat
    axes = tuple(range(1, d + 1))
    vals = scipy.fft.fftn(hat, axes=axes) / ahat.size
    return vals.real.reshape(len(times), -1)


def _reflected_index(lattice: LatticeSpec, x) -> np.ndarray:
    """Flat indices of ``x - u`` for every site ``u`` in flat order."""
    coords = lattice.coords()
    x = np.asarray(x, dtype=np.int64)
    return np.ravel_multi_index(tuple(((x - coords) % lattice.n).T), lattice.shape)


class _DuhamelIntegrand:
    """Evaluates ``exp(-c s) F(s)`` for the scaled pair moment at ``(x, y)``."""

    def __init__(self, kernel, rates, t, lattice, x, y, initial):
        self.kappa = rates.kappa
        self.c = _rate(rates)
        self.bg = rates.beta + rates.gamma
        self.t = t
        self.mass = kernel.mass
        self.initial = initial
        self.ahat = np.asarray(grid_symbol(kernel, lattice, extended=False))
        self.jump_hat = self.ahat + kernel.mass
        self.ix = _reflected_index(lattice, x)
        self.iy = _reflected_index(lattice, y)

    def __call__(self, s: np.ndarray) -> np.ndarray:
        P = _walk_fields(self.ahat, self.kappa, self.t - s)
        AP = _walk_fields(self.ahat, self.kappa, self.t - s, self.jump_hat)
        Px, Py = P[:, self.ix], P[:, self.iy]
        APx, APy = AP[:, self.ix], AP[:, self.iy]
        if self.initial == "delta":
            q = _walk_fields(self.ahat, self.kappa, s)
            Aq = _walk_fields(self.ahat, self.kappa, s, self.jump_hat)
        else:
            q = np.ones_like(P)
            Aq = self.mass * q
        g = self.kappa * (Aq + self.mass * q) + self.bg * q
        F = np.sum(Px * Py * g, axis=1) - self.kappa * np.sum(q * (Px * APy + APx * Py), axis=1)
        return np.exp(-self.c * s) * F


def _gauss_legendre(f, a, b, panels):
    nodes, weights = np.polynomial.legendre.leggauss(GL_ORDER)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    total = 0.0
    for lo in range(0, s.size, 512):
        total += float(np.dot(w[lo:lo + 512], f(s[lo:lo + 512])))
    return total


def _adaptive_integral(f, a, b, rtol=QUAD_RTOL, max_panels=MAX_PANELS):
    panels = 1
    prev = _gauss_legendre(f, a, b, panels)
    while True:
        panels *= 2
        if panels > max_panels:
            raise QuadratureStall(
                f"time integral did not settle to {rtol:g} within {max_panels} panels"
            )
        cur = _gauss_legendre(f, a, b, panels)
        if abs(cur - prev) <= rtol * abs(cur) or cur == prev:
            return cur
        prev = cur


def _scaled_lead(kernel, rates, t, lattice, x, y, initial):
    if initial == "uniform":
        return rates.rho0
    ahat = np.asarray(grid_symbol(kernel, lattice, extended=False))
    p = _walk_fields(ahat, rates.kappa, [t])[0]
    return float(p[lattice.index(x)] * p[lattice.index(y)])


def _scaled_spectral(kernel, rates, t, lattice, x, y, initial):
    """Exact ``exp(-2ct) M(t, x, y)`` from the two-frequency solution."""
    ahat = np.asarray(grid_symbol(kernel, lattice, extended=False)).ravel()
    N = lattice.size
    c = _rate(rates)
    kappa = rates.kappa
    bg = rates.beta + rates.gamma
    freqs = lattice.frequencies()
    if initial == "uniform":
        # translation invariant: one frequency k for v = y - x, k2 = -k
        a_neg = np.asarray(grid_symbol(kernel, lattice, extended=False))
        a_neg = np.roll(np.flip(a_neg), 1, axis=tuple(range(lattice.d))).ravel()
        A = kappa * (ahat + a_neg)          # scaled: A - 2c
        B = -c                              # scaled: kappa a(0) + c - 2c
        src = kappa * (-ahat - a_neg) + bg
        hat = src * _exp_difference(A, B, t)
        v = (np.asarray(y) - np.asarray(x)) % lattice.n
        kv = sum(f.ravel() * vi for f, vi in zip(np.meshgrid(*freqs, indexing="ij"), v))
        val = np.sum(hat * np.exp(-1j * kv)) / N
        return rates.rho0 + float(val.real)
    # delta initial data: full two-frequency grid
    k_sites = np.stack([f.ravel() for f in np.meshgrid(*freqs, indexing="ij")], axis=1)
    a1 = ahat[:, None]
    a2 = ahat[None, :]
    sum_idx = _frequency_sum_index(lattice)
    a12 = ahat[sum_idx]
    A = kappa * (a1 + a2)
    B = kappa * a12 - c
    src = kappa * (a12 - a1 - a2) + bg
    hat = np.exp(A * t) + src * _exp_difference(A, B, t)
    phase_x = np.exp(-1j * (k_sites @ np.asarray(x, dtype=np.float64)))
    phase_y = np.exp(-1j * (k_sites @ np.asarray(y, dtype=np.float64)))
    val = phase_x @ hat @ phase_y / N**2
    return float(val.real)


def _exp_difference(A, B, t):
    """``(exp(B t) - exp(A t)) / (B - A)`` without cancellation or spurious overflow."""
    A, B = np.broadcast_arrays(np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64))
    dz = B - A
    small = np.abs(dz * t) < 1.0
    safe = np.where(dz == 0, 1.0, dz)
    with np.errstate(over="ignore", invalid="ignore"):
        near = np.exp(A * t) * np.where(dz == 0, t, np.expm1(dz * t) / safe)
        far = (np.exp(B * t) - np.exp(A * t)) / safe
    return np.where(small, near, far)


def _frequency_sum_index(lattice: LatticeSpec) -> np.ndarray:
    """Flat index of ``k1 + k2`` for every pair of flat frequency indices."""
    grid = np.indices(lattice.shape).reshape(lattice.d, -1).T
    total = (grid[:, None, :] + grid[None, :, :]) % lattice.n
    return np.ravel_multi_index(tuple(np.moveaxis(total, -1, 0)), lattice.shape)


def _printed_hat(ahat, rates, t, kind):
    """The historical matrix-form expressions, evaluated literally."""
    kappa, beta, gamma = rates.kappa, rates.beta, rates.gamma
    ka = kappa * ahat
    if rates.balanced:
        e1, e2 = np.exp(ka * t), np.exp(2 * ka * t)
        if kind == "pair":
            return e2 + 2.0 * (e1 - e2)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(ka == 0, -t, (e1 - e2) / np.where(ka == 0, 1.0, ka))
        return e2 - (ka + 2 * kappa + beta + gamma) * frac
    # the doubled t in the first exponent is reproduced as printed
    lead = np.exp(2 * (ka * t + beta + gamma) * t)
    # bracket / denom, where bracket = exp(ka t) - exp(2 (ka + beta + gamma) t)
    denom = ka + 2 * beta + 2 * gamma
    safe = np.where(denom == 0, 1.0, denom)
    ratio = -np.exp(ka * t) * np.where(denom == 0, t, np.expm1(denom * t) / safe)
    if kind == "pair":
        return lead + 2 * ka * ratio
    return lead - (ka + 2 * kappa + beta + gamma) * ratio


def m2_inhomogeneous(kernel: MobilityKernel, rates: Rates, t: float, lattice: LatticeSpec,
                     kind: str = "same_site", v=None, x=None, initial: str = "delta",
                     method: str = "duhamel") -> PairMoment:
    """Infected pair moment ``E[I(t, x) I(t, x + v)]`` on the torus.

    Parameters
    ----------
    kind : {"same_site", "pair"}
    v : offset, optional
        Separation for ``kind="pair"``; must be nonzero.
    x : site, optional
        First site, the origin by default.
    initial : {"delta", "uniform"}
        ``"delta"`` starts from one infective at the origin, matching the
        first-moment solution and the particle simulator.  ``"uniform"``
        starts from ``m1_I = 1`` everywhere with pair moment ``rho0``.
    method : {"duhamel", "spectral", "printed"}
        ``"duhamel"`` propagates the initial data exactly and adds the
        source through adaptive Gauss-Legendre quadrature in time, doubling
        panels until two successive values agree to ``1e-8``.
        ``"spectral"`` sums the exact two-frequency solution.  ``"printed"``
        evaluates the historical closed-form expressions, which are not
        solutions; it ignores ``initial``.

    Returns
    -------
    PairMoment
    """
    _check_time(t)
    if kernel.d != lattice.d:
        raise DimensionMismatch(f"kernel is {kernel.d}-D but lattice is {lattice.d}-D")
    if kind not in ("same_site", "pair"):
        raise ValueError(f"kind must be 'same_site' or 'pair', got {kind!r}")
    if initial not in INITIAL_DATA:
        raise ValueError(f"initial must be one of {INITIAL_DATA}, got {initial!r}")
    d = lattice.d
    x = (0,) * d if x is None else tuple(int(c) for c in np.atleast_1d(x))
    if kind == "pair":
        if v is None:
            raise ValueError("pair moment needs a separation v")
        v = tuple(int(c) for c in np.atleast_1d(v))
        if len(v) != d:
            raise DimensionMismatch(f"separation {v} is not {d}-dimensional")
        if all(c % lattice.n == 0 for c in v):
            raise ZeroSeparation("pair moment needs a nonzero separation")
    else:
        v = (0,) * d
    y = tuple(a + b for a, b in zip(x, v))
    c = _rate(rates)

    if method == "printed":
        ahat = np.asarray(grid_symbol(kernel, lattice, extended=False))
        hat = _printed_hat(ahat, rates, t, kind)
        field = inverse_transform(hat).real
        site = v if kind == "pair" else x
        value = float(field.flat[lattice.index(site)])
        return PairMoment(float(t), kind, v, value, "II", x, None)

    if method == "duhamel":
        scaled = _scaled_lead(kernel, rates, t, lattice, x, y, initial)
        if t > 0:
            f = _DuhamelIntegrand(kernel, rates, t, lattice, x, y, initial)
            scaled += _adaptive_integral(f, 0.0, t)
    elif method == "spectral":
        scaled = _scaled_spectral(kernel, rates, t, lattice, x, y, initial)
    else:
        raise ValueError(f"unknown method {method!r}")
    return PairMoment(float(t), kind, v, _unscale(scaled, 2 * c * t), "II", x, scaled)


def _unscale(scaled: float, log_factor: float) -> float:
    if scaled == 0:
        return 0.0
    mag = math.log(abs(scaled)) + log_factor
    if mag > 709.7:
        return math.copysign(math.inf, scaled)
    return math.copysign(math.exp(mag), scaled)


# --- full pair system -----------------------------------------------------------

def m2_ode_oracle(kernel: MobilityKernel, rates: Rates, t: float, lattice: LatticeSpec,
                  initial: str = "delta", rtol: float = 1e-12, atol: float = 1e-14) -> dict:
    """Integrate the coupled first- and second-moment systems in real space.

    Returns a dict with the ``N x N`` arrays ``"II"``, ``"SS"``, ``"RR"``,
    ``"SI"`` and ``"RI"`` (entry ``[x, y]`` is ``E[X(x) Y(y)]`` in flat
    site order) together with the first moments ``"S"``, ``"I"``, ``"R"``.
    """
    _check_time(t)
    if kernel.d != lattice.d:
        raise DimensionMismatch(f"kernel is {kernel.d}-D but lattice is {lattice.d}-D")
    if initial not in INITIAL_DATA:
        raise ValueError(f"initial must be one of {INITIAL_DATA}, got {initial!r}")
    N = lattice.size
    if N * N > MAX_PAIRS:
        raise SystemTooLarge(f"{N * N} site pairs exceed the limit of {MAX_PAIRS}")
    K = generator_matrix(kernel, rates.kappa, lattice).toarray()
    J = kernel.jump_matrix(lattice).toarray()
    Jt = J.T.copy()
    beta, gamma, kappa = rates.beta, rates.gamma, rates.kappa
    c = beta - gamma
    mass = kernel.mass
    sizes = [N, N, N] + [N * N] * 5

    def noise(m):
        out = -kappa * (m[:, None] * J + Jt * m[None, :])
        out[np.diag_indices(N)] += kappa * (Jt @ m + mass * m)
        return out

    def rhs(_, y):
        s, i, r = y[:N], y[N:2 * N], y[2 * N:3 * N]
        blocks = y[3 * N:].reshape(5, N, N)
        II, SS, RR, SI, RI = blocks
        ds = K @ s - beta * i
        di = K @ i + c * i
        dr = K @ r + gamma * i
        diag_i = np.diag(i)
        dII = K @ II + II @ K.T + 2 * c * II + noise(i) + (beta + gamma) * diag_i
        dSS = K @ SS + SS @ K.T - beta * (SI + SI.T) + noise(s) + beta * diag_i
        dRR = K @ RR + RR @ K.T + gamma * (RI + RI.T) + noise(r) + gamma * diag_i
        dSI = K @ SI + SI @ K.T - beta * II + c * SI - beta * diag_i
        dRI = K @ RI + RI @ K.T + gamma * II + c * RI - gamma * diag_i
        return np.concatenate([ds, di, dr] + [b.ravel() for b in (dII, dSS, dRR, dSI, dRI)])

    rho0 = rates.rho0
    s0 = np.full(N, rho0)
    r0 = np.zeros(N)
    if initial == "delta":
        i0 = np.zeros(N)
        i0[0] = 1.0
        II0 = np.outer(i0, i0)
    else:
        i0 = np.ones(N)
        II0 = np.full((N, N), rho0)
    SS0 = np.outer(s0, s0)
    SI0 = np.outer(s0, i0)
    zero = np.zeros((N, N))
    y0 = np.concatenate([s0, i0, r0] + [b.ravel() for b in (II0, SS0, zero, SI0, zero)])
    if t == 0:
        y = y0
    else:
        sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise IntegratorFailure(sol.message)
        y = sol.y[:, -1]
    out = {}
    offsets = np.cumsum([0] + sizes)
    names = ["S", "I", "R"] + list(PAIR_BLOCKS)
    for j, name in enumerate(names):
        block = y[offsets[j]:offsets[j + 1]]
        out[name] = block.reshape(N, N) if j >= 3 else block
    return out


# --- classification -------------------------------------------------------------

TABLE4_ROWS = (
    {"row": 1, "when": "beta - gamma = 0, alpha < 0, theta < 0",
     "same_site": "zero", "pair": "zero", "feasible": True},
    {"row": 2, "when": "beta - gamma = 0, alpha = 0, theta = 0",
     "same_site": "delta", "pair": "delta", "feasible": True},
    {"row": 3, "when": "beta + gamma < 0, alpha < 0, mu < 0",
     "same_site": "zero", "pair": "zero", "feasible": False},
    {"row": 4, "when": "beta + gamma < 0, alpha = 0, mu < 0",
     "same_site": "scaled_delta", "pair": "zero", "feasible": False},
    {"row": 5, "when": "beta + gamma > 0, alpha < 0, mu < 0",
     "same_site": "zero", "pair": "zero", "feasible": True},
    {"row": 6, "when": "beta + gamma > 0, alpha <= 0, mu > 0",
     "same_site": "infinity", "pair": "infinity", "feasible": True},
)


def table4_feasibility() -> list[dict]:
    """Each inhomogeneous rule with whether nonnegative rates can reach it."""
    return [{"row": r["row"], "when": r["when"], "feasible": r["feasible"]} for r in TABLE4_ROWS]


def _sgn(x, scale):
    if abs(x) <= SIGN_TOL * max(scale, 1.0):
        return 0
    return 1 if x > 0 else -1


def _table4_row(s_diff, s_sum, s_alpha, s_theta, s_mu):
    """First rule whose sign pattern matches, in table order."""
    patterns = (
        s_diff == 0 and s_alpha < 0 and s_theta < 0,
        s_diff == 0 and s_alpha == 0 and s_theta == 0,
        s_sum < 0 and s_alpha < 0 and s_mu < 0,
        s_sum < 0 and s_alpha == 0 and s_mu < 0,
        s_sum > 0 and s_alpha < 0 and s_mu < 0,
        s_sum > 0 and s_alpha <= 0 and s_mu > 0,
    )
    for rule, hit in zip(TABLE4_ROWS, patterns):
        if hit:
            return rule
    return None


def classify_homogeneous_second_moment(rates: Rates) -> tuple[str, str]:
    """``(same_site, pair)`` limits by the sign of ``beta - gamma``."""
    if rates.balanced:
        return "infinity", "zero"
    return ("infinity", "infinity") if rates.growth > 0 else ("zero", "zero")


def classify_second_moment(kernel: MobilityKernel, rates: Rates, k) -> SecondMomentRegime:
    """Sign-table regimes of ``m2_I`` at frequency ``k``.

    The inhomogeneous rules are tried in order and the first match wins.
    Rules conditioned on ``beta + gamma < 0`` cannot fire for nonnegative
    rates; patterns that match no rule (for example ``mu = 0``) are
    reported as ``"unclassified"``.
    """
    kv = tuple(float(c) for c in np.atleast_1d(k))
    alpha = rates.kappa * symbol(kernel, kv).real
    theta = alpha + rates.beta - rates.gamma
    mu = alpha + rates.beta + rates.gamma
    scale = rates.kappa * kernel.mass + rates.beta + rates.gamma
    s_diff = 0 if rates.balanced else (1 if rates.growth > 0 else -1)
    s_sum = _sgn(rates.beta + rates.gamma, scale)
    rule = _table4_row(s_diff, s_sum, _sgn(alpha, scale), _sgn(theta, scale), _sgn(mu, scale))
    hom = classify_homogeneous_second_moment(rates)
    if rule is None:
        same, pair, row, feasible = "unclassified", "unclassified", None, True
    else:
        same, pair, row, feasible = rule["same_site"], rule["pair"], rule["row"], rule["feasible"]
    return SecondMomentRegime(kv, alpha, theta, mu, hom[0], hom[1], same, pair, row,
                              feasible, not kernel.symmetric)
