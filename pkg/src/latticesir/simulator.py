"""Exact stochastic simulation of the lattice SIR particle system.

Every particle jumps by ``z`` at rate ``kappa a(z)``; every infective
infects at rate ``beta`` (turning one susceptible at its site into an
infective) and recovers at rate ``gamma``.  Events are drawn one at a time
with exponential waiting times (Gillespie's direct method).

In ``"linear"`` mode an infection fires whether or not a susceptible is
present, so ``S`` may go negative; this is the process whose moments obey
the linear moment equations.  A negative ``S`` count is a signed
population: its units jump at rate ``kappa |S|`` and carry their sign.
``"clamped"`` mode only lets an infection fire when ``S(x) > 0``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EventBudgetExceeded, Extinct, NonIntegerDensity
from .first_moments import Rates
from .kernel import LatticeSpec, MobilityKernel, kernel_gaussian, kernel_nearest_neighbor

MODES = ("linear", "clamped")
MIN_REPLICAS = 100
DEFAULT_EVENT_BUDGET = 10**8
THREADS_ENV = "LATTICESIR_THREADS"


@dataclass
class SimState:
    """Integer compartment counts on a torus, plus the clock and generator.

    Counts are flat arrays in the lattice's C order.
    """

    lattice: LatticeSpec
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    clock: float = 0.0
    rng: np.random.Generator = field(default=None, repr=False)
    events: int = 0

    @property
    def population(self) -> int:
        return int(self.S.sum() + self.I.sum() + self.R.sum())

    def copy(self) -> "SimState":
        """Snapshot without the generator."""
        return SimState(self.lattice, self.S.copy(), self.I.copy(), self.R.copy(),
                        self.clock, None, self.events)

    def grid(self, name: str) -> np.ndarray:
        return getattr(self, name).reshape(self.lattice.shape)


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate of one moment with its standard error."""

    quantity: str
    sites: tuple
    mean: float
    standard_error: float
    replicas: int
    seed_base: int

    def to_dict(self) -> dict:
        return {"quantity": self.quantity, "sites": [list(s) for s in self.sites],
                "mean": self.mean, "standard_error": self.standard_error,
                "replicas": self.replicas, "seed_base": self.seed_base}


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for one replica."""
    return np.random.Generator(np.random.Philox(int(seed)))


def init_state(lattice: LatticeSpec, rates: Rates, seed: int, rho0=None) -> SimState:
    """``S = rho0`` everywhere, one infective at the origin, no recovered.

    ``rho0`` overrides ``rates.rho0`` (which must be positive) so that an
    empty background ``rho0 = 0`` can be simulated.
    """
    level = rates.rho0 if rho0 is None else rho0
    if level < 0 or level != int(level):
        raise NonIntegerDensity(f"simulation needs a nonnegative integer rho0, got {level}")
    N = lattice.size
    S = np.full(N, int(level), dtype=np.int64)
    I = np.zeros(N, dtype=np.int64)
    I[0] = 1
    R = np.zeros(N, dtype=np.int64)
    return SimState(lattice, S, I, R, 0.0, make_rng(seed), 0)


@lru_cache(maxsize=32)
def _jump_tables(kernel: MobilityKernel, lattice: LatticeSpec):
    """Cumulative offset weights and ``dest[j, x] = x + z_j`` on the torus."""
    coords = lattice.coords()
    dest = np.stack([
        np.ravel_multi_index(tuple(((coords + z) % lattice.n).T), lattice.shape)
        for z in kernel.offset_array
    ])
    cum = np.cumsum(kernel.weight_array)
    return cum / cum[-1], dest


def _pick(weights: np.ndarray, u: float) -> int:
    """Index ``i`` with ``cum[i-1] <= u < cum[i]`` for ``u`` in ``[0, sum)``."""
    cum = np.cumsum(weights)
    return min(int(np.searchsorted(cum, u, side="right")), weights.size - 1)


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _event_rates(state: SimState, rates: Rates, mode: str):
    S, I = state.S, state.I
    abs_s = np.abs(S)
    movers = abs_s + I + state.R
    i_tot = int(I.sum())
    mig = rates.kappa * float(movers.sum())
    if mode == "linear":
        inf_weights = I
        inf = rates.beta * i_tot
    else:
        inf_weights = np.where(S > 0, I, 0)
        inf = rates.beta * float(inf_weights.sum())
    rec = rates.gamma * i_tot
    return mig, inf, rec, movers, abs_s, inf_weights


def _apply(state, rates, kernel, u, parts):
    mig, inf, _, movers, abs_s, inf_weights = parts
    S, I, R = state.S, state.I, state.R
    rng = state.rng
    if u < mig:
        x = _pick(movers, u / rates.kappa)
        cum, dest = _jump_tables(kernel, state.lattice)
        j = min(int(np.searchsorted(cum, rng.random(), side="right")), cum.size - 1)
        y = dest[j, x]
        w = rng.random() * movers[x]
        if w < abs_s[x]:
            sign = 1 if S[x] > 0 else -1
            S[x] -= sign
            S[y] += sign
        elif w < abs_s[x] + I[x]:
            I[x] -= 1
            I[y] += 1
        else:
            R[x] -= 1
            R[y] += 1
    elif u < mig + inf:
        x = _pick(inf_weights, (u - mig) / rates.beta)
        S[x] -= 1
        I[x] += 1
    else:
        x = _pick(I, (u - mig - inf) / rates.gamma)
        I[x] -= 1
        R[x] += 1


def step(state: SimState, rates: Rates, kernel: MobilityKernel, mode: str = "linear"):
    """Execute one event in place.

    Returns
    -------
    (state, dt)
    """
    _check_mode(mode)
    parts = _event_rates(state, rates, mode)
    total = parts[0] + parts[1] + parts[2]
    if total <= 0:
        raise Extinct("no event has positive rate")
    dt = state.rng.exponential(1.0 / total)
    _apply(state, rates, kernel, state.rng.random() * total, parts)
    state.clock += dt
    state.events += 1
    return state, dt


def run(state: SimState, rates: Rates, kernel: MobilityKernel, mode: str = "linear",
        horizon: float = 0.0, snapshot_times=(), max_events: int = DEFAULT_EVENT_BUDGET):
    """Advance ``state`` in place up to ``horizon``.

    Returns a list of snapshots: the initial state, then the state in force
    at each of ``snapshot_times`` (with ``clock`` set to that time).  An
    event whose time would pass the horizon is discarded, which is exact
    because waiting times are memoryless.  An extinct state is held until
    the horizon.
    """
    _check_mode(mode)
    pending = sorted(float(t) for t in snapshot_times)
    if pending and pending[-1] > horizon:
        raise ValueError("snapshot times must not exceed the horizon")
    out = [state.copy()]
    budget = state.events + max_events
    while True:
        parts = _event_rates(state, rates, mode)
        total = parts[0] + parts[1] + parts[2]
        if total <= 0:
            break
        t_next = state.clock + state.rng.exponential(1.0 / total)
        while pending and pending[0] < t_next:
            out.append(_at_time(state, pending.pop(0)))
        if t_next > horizon:
            break
        if state.events >= budget:
            raise EventBudgetExceeded(f"more than {max_events} events before t={horizon:g}")
        _apply(state, rates, kernel, state.rng.random() * total, parts)
        state.clock = t_next
        state.events += 1
    while pending:
        out.append(_at_time(state, pending.pop(0)))
    return out


def _at_time(state: SimState, t: float) -> SimState:
    snap = state.copy()
    snap.clock = t
    return snap


def _replica_block(args):
    lattice, rates, kernel, mode, t, seeds, sites, pairs, rho0 = args
    idx = [lattice.index(s) for s in sites]
    pidx = [(lattice.index(a), lattice.index(b)) for a, b in pairs]
    rows = []
    for seed in seeds:
        st = init_state(lattice, rates, seed, rho0)
        run(st, rates, kernel, mode, horizon=t)
        row = [st.S[i] for i in idx] + [st.I[i] for i in idx] + [st.R[i] for i in idx]
        row += [st.I[a] * st.I[b] for a, b in pidx]
        rows.append(row)
    return np.asarray(rows, dtype=np.float64).reshape(len(seeds), -1)


def worker_count() -> int:
    """Replica parallelism allowed by ``LATTICESIR_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def mc_moments(lattice: LatticeSpec, rates: Rates, kernel: MobilityKernel, mode: str,
               t: float, replicas: int, seed_base: int, sites=None, pairs=None,
               rho0=None) -> list[McEstimate]:
    """Monte Carlo estimates of first and second moments at time ``t``.

    Replica ``i`` uses seed ``seed_base + i``, so results do not depend on
    how replicas are distributed over workers.  Estimates ``E[S(x)]``,
    ``E[I(x)]``, ``E[R(x)]`` at ``sites`` (default: the origin) and
    ``E[I(x) I(y)]`` at ``pairs`` (default: origin with itself).
    """
    _check_mode(mode)
    if replicas < MIN_REPLICAS:
        raise ValueError(f"need at least {MIN_REPLICAS} replicas, got {replicas}")
    origin = (0,) * lattice.d
    sites = [tuple(np.atleast_1d(s).tolist()) for s in (sites or [origin])]
    pairs = [(tuple(np.atleast_1d(a).tolist()), tuple(np.atleast_1d(b).tolist()))
             for a, b in (pairs or [(origin, origin)])]
    seeds = [seed_base + i for i in range(replicas)]
    workers = min(worker_count(), replicas)
    chunks = [seeds[k * replicas // workers:(k + 1) * replicas // workers] for k in range(workers)]
    jobs = [(lattice, rates, kernel, mode, t, c, sites, pairs, rho0) for c in chunks]
    if workers == 1:
        blocks = [_replica_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_replica_block, jobs))
    data = np.concatenate(blocks, axis=0)

    labels = []
    for name in ("m1_S", "m1_I", "m1_R"):
        labels += [(name, (s,)) for s in sites]
    labels += [("m2_II", p) for p in pairs]
    out = []
    for col, (name, where) in enumerate(labels):
        values = data[:, col]
        mean = math.fsum(values.tolist()) / replicas
        se = float(np.std(values, ddof=1)) / math.sqrt(replicas)
        out.append(McEstimate(name, where, mean, se, replicas, seed_base))
    return out


# --- local versus nonlocal spread ----------------------------------------------

FIGURE1_N = 51
FIGURE1_START = (25, 25)  # the centre, (26, 26) counting from one
FIGURE1_RATES = Rates(kappa=1.0, beta=1.0, gamma=0.0, rho0=1.0)


@dataclass(frozen=True)
class SpreadResult:
    """Occupancy grid and spread statistics of one kernel variant."""

    occupancy: np.ndarray       # events during which each site held an infective
    msd_events: np.ndarray      # event counts at which the MSD was sampled
    msd: np.ndarray             # mean squared displacement of the infectives
    distinct_sites: int

    @property
    def final_msd(self) -> float:
        return float(self.msd[-1])


def _displacement_sq(lattice: LatticeSpec, start) -> np.ndarray:
    """Minimal-image squared distance of every site from ``start``."""
    delta = (lattice.coords() - np.asarray(start)) % lattice.n
    delta = np.minimum(delta, lattice.n - delta)
    return (delta**2).sum(axis=1).astype(np.float64)


def _spread(kernel, rates, events, seed, mode, n, start, every):
    lattice = LatticeSpec(2, n)
    st = init_state(lattice, rates, seed)
    st.I[0] = 0
    st.I[lattice.index(start)] = 1
    r2 = _displacement_sq(lattice, start)
    occupancy = np.zeros(lattice.size, dtype=np.int64)
    samples, msd = [], []
    for e in range(1, events + 1):
        try:
            step(st, rates, kernel, mode)
        except Extinct:
            break
        occupancy += st.I > 0
        if e % every == 0 or e == events:
            tot = st.I.sum()
            samples.append(e)
            msd.append(float(st.I @ r2) / tot if tot else 0.0)
    return SpreadResult(occupancy.reshape(lattice.shape), np.asarray(samples),
                        np.asarray(msd), int(np.count_nonzero(occupancy)))


def figure1_experiment(nonlocal_kernel: MobilityKernel | None = None,
                       local_kernel: MobilityKernel | None = None, events: int = 50_000,
                       seed: int = 2024, rates: Rates = FIGURE1_RATES, mode: str = "clamped",
                       n: int = FIGURE1_N, start=FIGURE1_START, every: int = 500) -> dict:
    """Compare epidemic spread under nonlocal and nearest-neighbour mobility.

    Both variants start from one infective at the centre of a 51 x 51 torus
    with one susceptible per site, run ``events`` events of the exact chain
    from the same seed, and record per-site infected occupancy and the mean
    squared displacement of the infectives from the start.

    Returns
    -------
    dict
        ``{"nonlocal": SpreadResult, "local": SpreadResult, "msd_ratio": float,
        "distinct_ratio": float}``
    """
    _check_mode(mode)
    nonlocal_kernel = nonlocal_kernel or kernel_gaussian(2, 16.0, 12)
    local_kernel = local_kernel or kernel_nearest_neighbor(2)
    far = _spread(nonlocal_kernel, rates, events, seed, mode, n, start, every)
    near = _spread(local_kernel, rates, events, seed, mode, n, start, every)
    return {
        "nonlocal": far,
        "local": near,
        "msd_ratio": far.final_msd / near.final_msd if near.final_msd else math.inf,
        "distinct_ratio": far.distinct_sites / max(near.distinct_sites, 1),
    }
