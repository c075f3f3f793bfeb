from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_quotes
from npsuperhedge.efficient_set import EfficientCurve, efficient_set, nu0, q0_at
from npsuperhedge.exceptions import InsufficientStrikesError
from npsuperhedge.quotes import QuoteCurve
from npsuperhedge.superhedge import lp_oracle, option_payoff
from oracles import dykstra_minorant


def test_all_four_efficient(four_strikes):
    assert four_strikes.strikes.tolist() == [0, 100, 110, 120]
    assert np.allclose(four_strikes.slopes(), [-0.88, -0.3, -0.1])
    for k, q in zip(four_strikes.strikes, four_strikes.prices):
        assert lp_oracle(option_payoff(k), four_strikes) == pytest.approx(q, abs=1e-9)


def test_dominated_strike_removed():
    curve = QuoteCurve([0, 100, 110, 120], [100, 12, 11, 8])
    eff = efficient_set(curve)
    assert eff.strikes.tolist() == [0, 100, 120]
    assert eff.mask.tolist() == [True, True, False, True]
    assert q0_at(eff, 110) == pytest.approx(10.0)
    # the LP over the full quote set agrees
    full = EfficientCurve(curve.strikes, curve.asks)
    assert lp_oracle(option_payoff(110), full) == pytest.approx(10.0, abs=1e-9)


def test_two_points():
    eff = efficient_set(QuoteCurve([0, 50], [100, 60]))
    assert eff.strikes.tolist() == [0, 50]


def test_only_underlying_is_an_error():
    with pytest.raises(InsufficientStrikesError):
        efficient_set(QuoteCurve([0], [100]))


def test_rising_tail_truncated():
    eff = efficient_set(QuoteCurve([0, 100, 110, 120], [100, 12, 9, 9.5]))
    assert eff.strikes.tolist() == [0, 100, 110]
    assert q0_at(eff, 500.0) == 9.0


def test_collinear_points_kept():
    eff = efficient_set(QuoteCurve([0, 100, 110, 120], [100, 12, 10, 8]))
    assert eff.size == 3
    levels = nu0(eff).levels
    assert levels[1] == pytest.approx(levels[2])


def test_q0_examples(four_strikes):
    eff = efficient_set(QuoteCurve([0, 100, 120], [100, 12, 8]))
    assert q0_at(eff, 110) == pytest.approx(10.0)
    assert q0_at(four_strikes, 110) == 9.0
    assert q0_at(four_strikes, 170) == 8.0
    assert q0_at(four_strikes, 0) == 100.0
    with pytest.raises(ValueError):
        q0_at(four_strikes, -1)


def test_nu0_levels(four_strikes):
    s = nu0(four_strikes)
    assert s(105.0) == pytest.approx(0.3)
    assert s(110.0) == pytest.approx(0.3)  # right-closed intervals
    assert s(110.5) == pytest.approx(0.1)
    assert s(121.0) == 0.0
    assert s(1e6) == 0.0


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 14))
def test_hull_properties(seed, n):
    rng = np.random.default_rng(seed)
    curve = random_quotes(rng, n)
    eff = efficient_set(curve)
    if np.all(curve.asks[1:] > curve.asks[0]):
        # every option costs more than the underlying, which then superhedges them all
        assert eff.strikes.tolist() == [0.0]
        assert np.all(q0_at(eff, curve.strikes) == curve.asks[0])
        return
    q0 = q0_at(eff, curve.strikes)
    # dominance, with equality exactly on the efficient set
    assert np.all(q0 <= curve.asks + 1e-9)
    assert np.allclose(q0[eff.mask], curve.asks[eff.mask], rtol=0, atol=1e-12)
    # convex, non-increasing
    slopes = eff.slopes()
    assert np.all(slopes <= 1e-12)
    assert np.all(np.diff(slopes) >= -1e-12)
    levels = nu0(eff).levels
    assert np.all(levels >= -1e-12) and np.all(np.diff(levels) <= 1e-12)
    # idempotence
    again = efficient_set(eff.as_quote_curve())
    assert np.array_equal(again.strikes, eff.strikes)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10))
def test_lp_oracle_agrees_at_every_quote(seed, n):
    rng = np.random.default_rng(seed)
    curve = random_quotes(rng, n)
    eff = efficient_set(curve)
    for k in curve.strikes:
        assert q0_at(eff, k) == pytest.approx(lp_oracle(option_payoff(k), eff), abs=1e-9)


def test_dykstra_reference_agrees():
    rng = np.random.default_rng(7)
    for _ in range(40):
        curve = random_quotes(rng, int(rng.integers(2, 14)))
        eff = efficient_set(curve)
        ref = dykstra_minorant(curve.strikes, curve.asks)
        assert np.max(np.abs(ref - q0_at(eff, curve.strikes))) < 1e-7
