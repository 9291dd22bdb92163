import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticesir.errors import SystemTooLarge, ZeroSeparation
from latticesir.first_moments import Rates
from latticesir.kernel import LatticeSpec, kernel_nearest_neighbor
from latticesir.second_moments import (
    TABLE4_ROWS,
    classify_homogeneous_second_moment,
    classify_second_moment,
    m2_homogeneous_pair,
    m2_homogeneous_same_site,
    m2_inhomogeneous,
    m2_ode_oracle,
    table4_feasibility,
)

NN1 = kernel_nearest_neighbor(1)
RATE_SETS = [Rates(1.0, 0.4, 0.6), Rates(1.0, 0.5, 0.5), Rates(1.0, 0.6, 0.4)]


def test_homogeneous_same_site_values():
    # rho0 e^{2ct} + (beta+gamma+2kappa) e^{ct}(e^{ct}-1)/c at c=0.2, t=1
    r = Rates(1.0, 0.6, 0.4)
    c = 0.2
    ref = math.exp(2 * c) + 3.0 * math.exp(c) * math.expm1(c) / c
    assert m2_homogeneous_same_site(r, 1.0) == pytest.approx(ref, rel=1e-14)
    assert m2_homogeneous_same_site(r, 1.0) == pytest.approx(5.548154, abs=1e-6)
    assert m2_homogeneous_same_site(Rates(1.0, 0.5, 0.5), 2.0) == pytest.approx(7.0)


def test_homogeneous_pair():
    r = Rates(1.0, 0.5, 0.5)
    assert m2_homogeneous_pair(r, NN1, 1, 2.0) == pytest.approx(1.0 - 2 * 0.5 * 2.0)
    assert m2_homogeneous_pair(r, NN1, 3, 2.0) == pytest.approx(1.0)
    with pytest.raises(ZeroSeparation):
        m2_homogeneous_pair(r, NN1, 0, 1.0)


def test_homogeneous_exact_without_mobility():
    r = Rates(0.0, 0.6, 0.4, 2.0)
    ode = m2_ode_oracle(NN1, r, 1.5, LatticeSpec(1, 4), initial="uniform")
    assert ode["II"][0, 0] == pytest.approx(m2_homogeneous_same_site(r, 1.5), rel=1e-10)


@pytest.mark.parametrize("rates", RATE_SETS)
@pytest.mark.parametrize("initial", ["delta", "uniform"])
def test_duhamel_spectral_ode_agree(rates, initial):
    lat = LatticeSpec(1, 8)
    t = 0.5
    ode = m2_ode_oracle(NN1, rates, t, lat, initial=initial)
    for kind, v, ref in [("same_site", None, ode["II"][0, 0]), ("pair", 1, ode["II"][0, 1])]:
        for method in ("duhamel", "spectral"):
            got = m2_inhomogeneous(NN1, rates, t, lat, kind, v=v, initial=initial, method=method)
            assert got.value == pytest.approx(ref, rel=1e-8)


def test_off_origin_site():
    lat = LatticeSpec(1, 8)
    r = RATE_SETS[2]
    ode = m2_ode_oracle(NN1, r, 1.0, lat)
    got = m2_inhomogeneous(NN1, r, 1.0, lat, "pair", v=2, x=3)
    assert got.value == pytest.approx(ode["II"][3, 5], rel=1e-8)


def test_printed_method_differs_from_oracle():
    lat = LatticeSpec(1, 8)
    r = RATE_SETS[2]
    ode = m2_ode_oracle(NN1, r, 1.0, lat)
    printed = m2_inhomogeneous(NN1, r, 1.0, lat, method="printed")
    assert abs(printed.value - ode["II"][0, 0]) > 1e-3 * abs(ode["II"][0, 0])


def test_system_too_large():
    with pytest.raises(SystemTooLarge):
        m2_ode_oracle(NN1, RATE_SETS[0], 1.0, LatticeSpec(1, 65))


def test_zero_separation_rejected():
    with pytest.raises(ZeroSeparation):
        m2_inhomogeneous(NN1, RATE_SETS[0], 1.0, LatticeSpec(1, 8), "pair", v=8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 3.0))
def test_same_site_dominates_square_of_mean(kappa, beta, gamma, t):
    # Var I(t, 0) >= 0
    lat = LatticeSpec(1, 8)
    r = Rates(kappa, beta, gamma)
    m2 = m2_inhomogeneous(NN1, r, t, lat, method="spectral")
    ode = m2_ode_oracle(NN1, r, t, lat)
    m1 = ode["I"][0]
    assert m2.value >= m1 * m1 * (1 - 1e-9)


def test_homogeneous_second_moment_labels():
    assert classify_homogeneous_second_moment(Rates(1, 0.6, 0.4)) == ("infinity", "infinity")
    assert classify_homogeneous_second_moment(Rates(1, 0.5, 0.5)) == ("infinity", "zero")
    assert classify_homogeneous_second_moment(Rates(1, 0.4, 0.6)) == ("zero", "zero")


@pytest.mark.parametrize(
    "rates, k, row",
    [
        (Rates(1.0, 0.5, 0.5), math.pi / 2, 1),
        (Rates(1.0, 0.5, 0.5), 0.0, 2),
        (Rates(1.0, 0.1, 0.2), math.pi / 2, 5),
        (Rates(1.0, 0.6, 0.4), 0.0, 6),
    ],
)
def test_table4_rows(rates, k, row):
    reg = classify_second_moment(NN1, rates, k)
    rule = next(r for r in TABLE4_ROWS if r["row"] == row)
    assert reg.row == row
    assert (reg.same_site, reg.pair) == (rule["same_site"], rule["pair"])


def test_infeasible_rows_reported():
    feas = {r["row"]: r["feasible"] for r in table4_feasibility()}
    assert feas == {1: True, 2: True, 3: False, 4: False, 5: True, 6: True}


def test_zero_mu_unclassified():
    # beta + gamma = 1, alpha = -1: mu = 0 matches no rule
    reg = classify_second_moment(NN1, Rates(1.0, 0.4, 0.6), math.pi / 2)
    assert reg.same_site == "unclassified"
    assert reg.row is None


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(-math.pi, math.pi))
def test_infeasible_rows_never_fire(kappa, beta, gamma, k):
    reg = classify_second_moment(NN1, Rates(kappa, beta, gamma), k)
    assert reg.row not in (3, 4)
    assert reg.feasible
