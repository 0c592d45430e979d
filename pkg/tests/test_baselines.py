import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from noma_pair.baselines import (
    POWER_ACCOUNTING,
    golden_section_minimize,
    jain_index,
    tdma_optimize_fractions,
    tdma_pair_power,
    tdma_required_power,
)
from noma_pair.channel import make_rng
from noma_pair.errors import ArgumentError, InfeasibleError
from noma_pair.rates import sic_individual_rates, sic_rates_for_pair


def test_power_accounting_declared():
    assert POWER_ACCOUNTING == "average"


def test_required_power_examples():
    a = tdma_required_power([1.0], [1.0], [1.0])
    assert a.slot_powers == (1.0,) and a.total_power == 1.0
    a = tdma_required_power([1.0, 0.0], [1.0, 1.0], [0.5, 0.5])
    assert a.slot_powers[0] == pytest.approx(3.0, abs=1e-15)
    assert a.fractions[0] * a.slot_powers[0] == pytest.approx(1.5, abs=1e-15)
    assert a.slot_powers[1] == 0 and a.total_power == pytest.approx(1.5)


def test_tdma_needs_more_power_than_noma():
    # both users at unit gain and unit power reach the SIC rates with NOMA power 2
    targets = sic_individual_rates(1.0, 1.0)
    a = tdma_required_power(targets, [1.0, 1.0], [0.5, 0.5])
    assert a.total_power > 2.0


def test_required_power_errors():
    with pytest.raises(InfeasibleError):
        tdma_required_power([1.0, 1.0], [0.0, 1.0], [0.5, 0.5])
    assert tdma_required_power([0.0, 1.0], [0.0, 1.0], [0.5, 0.5]).slot_powers[0] == 0
    with pytest.raises(ArgumentError):
        tdma_required_power([1.0, 1.0], [1.0, 1.0], [0.5, 0.6])
    with pytest.raises(ArgumentError):
        tdma_required_power([1.0, 1.0], [1.0, 1.0], [1.0, 0.0])
    with pytest.raises(ArgumentError):
        tdma_required_power([-1.0], [1.0], [1.0])
    with pytest.raises(InfeasibleError):
        tdma_optimize_fractions([1.0, 1.0], [1.0, 0.0])


def test_optimum_symmetric():
    a = tdma_optimize_fractions([1.3, 1.3], [2.0, 2.0])
    assert a.fractions[0] == pytest.approx(0.5, abs=1e-8)


def test_optimum_single_user_limit():
    a = tdma_optimize_fractions([2.0, 0.0], [3.0, 5.0])
    assert a.fractions[0] == pytest.approx(1 - 1e-9, abs=1e-15)
    assert a.total_power == pytest.approx((2**2 - 1) / 3.0, rel=1e-8)
    b = tdma_optimize_fractions([0.0, 2.0], [3.0, 5.0])
    assert b.fractions[1] == pytest.approx(1 - 1e-9, abs=1e-15)
    assert b.total_power == pytest.approx((2**2 - 1) / 5.0, rel=1e-8)


def test_optimum_matches_grid_search():
    rng = make_rng(0)
    grid = np.linspace(1e-4, 1 - 1e-4, 10_000)
    for _ in range(100):
        rates = rng.uniform(0.05, 4.0, 2)
        gains = rng.exponential(3.0, 2) + 1e-3
        a = tdma_optimize_fractions(rates, gains)
        equal = tdma_required_power(rates, gains, [0.5, 0.5]).total_power
        best_grid = min(tdma_pair_power(rates, gains, z) for z in grid)
        assert a.total_power <= equal * (1 + 1e-12)
        assert a.total_power <= best_grid * (1 + 1e-6)


@settings(max_examples=200, deadline=None)
@given(
    r=st.tuples(st.floats(0, 6), st.floats(0, 6)),
    q=st.tuples(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3)),
)
def test_optimum_never_above_equal_split(r, q):
    a = tdma_optimize_fractions(r, q)
    equal = tdma_required_power(r, q, [0.5, 0.5]).total_power
    assert a.total_power <= equal * (1 + 1e-12) + 1e-300


@settings(max_examples=200, deadline=None)
@given(g=st.tuples(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3)), p=st.floats(0.01, 100.0))
def test_achievability_round_trip(g, p):
    # NOMA targets for unit-noise gains q: received SNR is q * p
    q = np.array(g)
    targets = sic_rates_for_pair(q[0] * p, q[1] * p)
    for alloc in (tdma_optimize_fractions(targets, q), tdma_required_power(targets, q, [0.5, 0.5])):
        got = alloc.rates(q)
        assert got[0] == pytest.approx(targets[0], abs=1e-9)
        assert got[1] == pytest.approx(targets[1], abs=1e-9)


def test_golden_section():
    x = golden_section_minimize(lambda z: (z - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-8)


def test_jain_examples():
    assert jain_index([1, 1, 1, 1]) == 1
    assert jain_index([1, 0, 0, 0]) == 0.25
    assert jain_index([2, 1]) == pytest.approx(0.9, abs=1e-15)
    with pytest.raises(ArgumentError):
        jain_index([0, 0])
    with pytest.raises(ArgumentError):
        jain_index([])
    with pytest.raises(ArgumentError):
        jain_index([1, -1])


@given(
    st.lists(st.floats(0, 1e6), min_size=1, max_size=50),
    st.floats(1e-6, 1e6),
)
def test_jain_properties(rates, c):
    r = np.array(rates)
    assume(r.max() > 1e-150)
    j = jain_index(r)
    assert 1 / r.size - 1e-12 <= j <= 1 + 1e-12
    assert jain_index(c * r) == pytest.approx(j, rel=1e-12)
