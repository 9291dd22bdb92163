
import numpy as np
import pytest

from latticesir.errors import EventBudgetExceeded, Extinct, NonIntegerDensity
from latticesir.first_moments import Rates, m1_inhomogeneous
from latticesir.kernel import LatticeSpec, kernel_nearest_neighbor
from latticesir.simulator import (
    figure1_experiment,
    init_state,
    mc_moments,
    run,
    step,
    worker_count,
)

NN1 = kernel_nearest_neighbor(1)
BASE = Rates(1.0, 0.4, 0.6)


def test_init_state():
    st = init_state(LatticeSpec(1, 5), Rates(1.0, 0.4, 0.6, 2.0), 0)
    assert st.S.tolist() == [2] * 5
    assert st.I.tolist() == [1, 0, 0, 0, 0]
    with pytest.raises(NonIntegerDensity):
        init_state(LatticeSpec(1, 5), Rates(1.0, 0.4, 0.6, 1.5), 0)
    assert init_state(LatticeSpec(1, 5), BASE, 0, rho0=0).S.sum() == 0


def test_linear_mode_conserves_signed_population():
    lat = LatticeSpec(1, 5)
    st = init_state(lat, BASE, 11)
    start = st.population
    for _ in range(200):
        try:
            step(st, BASE, NN1, "linear")
        except Extinct:
            break
        # infection moves one unit S -> I, everything else conserves each compartment
        assert st.population == start


def test_clamped_mode_keeps_s_nonnegative():
    lat = LatticeSpec(1, 5)
    r = Rates(0.5, 5.0, 0.1)
    st = init_state(lat, r, 3)
    run(st, r, NN1, "clamped", horizon=3.0, max_events=10**6)
    assert st.S.min() >= 0


def test_extinct_state_raises_on_step():
    lat = LatticeSpec(1, 3)
    st = init_state(lat, Rates(0.0, 0.0, 1.0), 0, rho0=0)
    step(st, Rates(0.0, 0.0, 1.0), NN1)
    with pytest.raises(Extinct):
        step(st, Rates(0.0, 0.0, 1.0), NN1)


def test_run_snapshots_and_determinism():
    lat = LatticeSpec(1, 5)
    a = run(init_state(lat, BASE, 7), BASE, NN1, horizon=2.0, snapshot_times=[0.5, 1.0])
    b = run(init_state(lat, BASE, 7), BASE, NN1, horizon=2.0, snapshot_times=[0.5, 1.0])
    assert [s.clock for s in a] == [0.0, 0.5, 1.0]
    for x, y in zip(a, b):
        assert np.array_equal(x.I, y.I) and np.array_equal(x.S, y.S)


def test_event_budget():
    lat = LatticeSpec(1, 5)
    with pytest.raises(EventBudgetExceeded):
        run(init_state(lat, BASE, 1), BASE, NN1, horizon=100.0, max_events=3)


def test_mc_mean_matches_first_moment():
    lat = LatticeSpec(1, 5)
    ests = mc_moments(lat, BASE, NN1, "linear", 1.0, 4000, 0)
    est = {e.quantity: e for e in ests}
    _, m_i, _ = m1_inhomogeneous(NN1, BASE, 1.0, lat)
    assert abs(est["m1_I"].mean - m_i.at(0)) <= 4 * est["m1_I"].standard_error


def test_mc_independent_of_workers(monkeypatch):
    lat = LatticeSpec(1, 5)
    monkeypatch.setenv("LATTICESIR_THREADS", "1")
    one = mc_moments(lat, BASE, NN1, "linear", 0.5, 120, 5)
    monkeypatch.setenv("LATTICESIR_THREADS", "3")
    assert worker_count() == 3
    three = mc_moments(lat, BASE, NN1, "linear", 0.5, 120, 5)
    assert [e.mean for e in one] == [e.mean for e in three]


def test_mc_needs_replicas():
    with pytest.raises(ValueError):
        mc_moments(LatticeSpec(1, 5), BASE, NN1, "linear", 1.0, 10, 0)


def test_figure1_small_run_is_reproducible():
    a = figure1_experiment(events=2000, seed=5)
    b = figure1_experiment(events=2000, seed=5)
    assert np.array_equal(a["nonlocal"].occupancy, b["nonlocal"].occupancy)
    assert a["msd_ratio"] == b["msd_ratio"]
    assert a["nonlocal"].occupancy.shape == (51, 51)
