from __future__ import annotations

import warnings

import numpy as np
import pytest
from scipy.stats import norm

from conftest import random_quotes
from npsuperhedge.efficient_set import efficient_set, q0_at
from npsuperhedge.exceptions import ConfigurationError, DegenerateMeasureError
from npsuperhedge.implied_measure import (
    ImpliedMeasure,
    implied_survival,
    reconstruct_price,
    smooth_call_curve,
    step_measure,
    var_cvar,
)
from npsuperhedge.quotes import QuoteCurve


def smile_like_curve() -> QuoteCurve:
    # Black-Scholes calls on the simulation grid, without noise
    from npsuperhedge.simulation import SmileModel

    model = SmileModel()
    return QuoteCurve(np.r_[0.0, model.strikes], np.r_[model.spot, model.price(model.strikes)])


@pytest.fixture(scope="module")
def eff():
    return efficient_set(smile_like_curve())


KINDS = ["spline", "normal"]


@pytest.mark.parametrize("kind", KINDS)
def test_worked_example_values(four_strikes, kind):
    curve = smooth_call_curve(four_strikes, kind, h=1.0)
    assert curve.beta == 8.0
    assert np.allclose(curve.b, [0.58, 0.2, 0.1, 8.0])


def test_normal_by_hand(four_strikes):
    curve = smooth_call_curve(four_strikes, "normal", h=1.0)

    def g(x, k=110.0):
        z = x - k
        return z * norm.cdf(z) + norm.pdf(z)

    expected = 0.58 * g(100.0) + 0.2 * g(110.0) + 0.1 * g(120.0) + 8.0
    assert curve(110.0) == pytest.approx(expected, abs=1e-12)
    assert curve(110.0) == pytest.approx(0.2 * 0.3989422804 + 9.0, abs=1e-9)


def test_normal_density_is_gaussian_mixture(four_strikes):
    curve = smooth_call_curve(four_strikes, "normal", h=2.5)
    x = np.linspace(80, 140, 301)
    mix = sum(b * norm.pdf(x, loc=j, scale=2.5) for b, j in zip([0.58, 0.2, 0.1], [100, 110, 120]))
    assert np.allclose(curve.density(x), mix, atol=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_converges_to_q0_at_knots(eff, kind):
    for h in (1.0, 1e-2, 1e-4):
        curve = smooth_call_curve(eff, kind, h=h)
        err = np.max(np.abs(curve(eff.strikes[1:]) - eff.prices[1:]))
        assert err <= 0.5 * h


@pytest.mark.parametrize("kind", KINDS)
def test_gap_to_q0_bounded(eff, kind):
    for delta in (1.0, 2.0, 5.0):
        curve = smooth_call_curve(eff, kind, delta=delta)
        h = curve.h
        k = np.linspace(eff.strikes[1], eff.strikes[-1] + 3 * h, 400)
        gap = curve(k) - q0_at(eff, k)
        center = np.array([curve.payoff(x)(x) for x in k])
        bound = center * eff.prices[0] / np.minimum(k - h, 1.0)
        assert np.all(gap >= -1e-10)
        assert np.all(gap <= bound + 1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_shape_on_dense_grid(eff, kind):
    curve = smooth_call_curve(eff, kind, delta=5.0)
    k = np.linspace(eff.strikes[1] / 2, 2 * eff.strikes[-1], 1000)
    q = curve(k)
    assert np.all(q > 0)
    assert np.all(np.diff(q) <= 1e-10)
    assert np.all(np.diff(q, 2) >= -1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_local_weights(eff, kind):
    curve = smooth_call_curve(eff, kind, delta=2.0)
    for k in np.linspace(1050, 1650, 13):
        w = curve.local_weights(k)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0)
        # the weights price the smoothed call consistently
        assert w @ eff.prices == pytest.approx(curve(k), rel=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_survival_matches_finite_differences(eff, kind):
    curve = smooth_call_curve(eff, kind, delta=2.0)
    t = np.linspace(1010, 1700, 50) + 0.37
    errs = []
    for rel in (1e-4, 1e-5):
        eps = rel * t
        fd = (curve(t - eps) - curve(t + eps)) / (2 * eps)
        errs.append(np.max(np.abs(fd - curve.survival(t))))
    # second order: shrinking eps tenfold cuts the error about a hundredfold
    assert errs[0] < 1e-5
    assert errs[1] < errs[0] / 50
    s = curve.survival(np.linspace(0, 5000, 2001))
    assert np.all(s >= 0) and np.all(np.diff(s) <= 1e-14)
    assert curve.survival(1e5) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_density_matches_finite_differences(eff, kind):
    curve = smooth_call_curve(eff, kind, delta=2.0)
    t = np.linspace(1010, 1700, 50) + 0.37
    eps = 1e-3
    fd = (curve.survival(t - eps) - curve.survival(t + eps)) / (2 * eps)
    assert np.allclose(fd, curve.density(t), atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_representation_closure(eff, kind):
    curve = smooth_call_curve(eff, kind, delta=2.0)
    measure = implied_survival(curve)
    assert measure.beta == eff.prices[-1]
    q0 = eff.prices[0]
    for t in np.linspace(0, eff.strikes[-1] + 200, 100):
        assert abs(reconstruct_price(measure, t) - curve(t)) <= 1e-6 * q0
    assert reconstruct_price(measure, measure.upper + 1.0) == measure.beta


def test_step_measure_recovers_q0(eff):
    measure = step_measure(eff)
    t = np.linspace(0, eff.strikes[-1] + 50, 333)
    rec = np.array([reconstruct_price(measure, x) for x in t])
    assert np.allclose(rec, q0_at(eff, t), atol=1e-9)


def test_reconstruct_rejects_negative():
    with pytest.raises(ValueError):
        reconstruct_price(step_measure(efficient_set(QuoteCurve([0, 1], [2, 1]))), -1.0)


def test_delta_validation(eff):
    with pytest.raises(ConfigurationError) as info:
        smooth_call_curve(eff, "spline", delta=0.0)
    assert info.value.field == "delta"
    with pytest.raises(ConfigurationError):
        smooth_call_curve(eff, "spline", h=-1.0)
    with pytest.raises(ConfigurationError):
        smooth_call_curve(eff, "cauchy", h=1.0)


def test_large_bandwidth_warns(eff):
    with pytest.warns(UserWarning, match="smallest efficient strike"):
        smooth_call_curve(eff, "spline", h=2000.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        smooth_call_curve(eff, "spline", h=28.0)


def uniform_measure(lo=1000.0, hi=1700.0) -> ImpliedMeasure:
    def survival(x):
        return np.clip((hi - np.asarray(x, dtype=float)) / (hi - lo), 0.0, 1.0)

    return ImpliedMeasure(
        beta=0.0,
        survival=survival,
        density=None,
        support_hint=(lo, hi),
        upper=hi,
        breakpoints=np.array([lo, hi]),
        scale=1365.0,
    )


def test_var_cvar_uniform_example():
    rep = var_cvar(uniform_measure(), 1400.0, levels=(0.05,))
    assert rep.quantiles[0] == pytest.approx(1035.0, abs=1e-9)
    assert rep.var[0] == pytest.approx(365.0, abs=1e-9)
    assert rep.cvar[0] == pytest.approx(382.5, abs=1e-7)
    d = rep.to_dict()
    assert set(d) == {"levels", "var", "cvar", "quantiles", "position_price", "window"}


def test_var_cvar_full_mass():
    rep = var_cvar(uniform_measure(), 1400.0, levels=(1.0,))
    assert rep.var[0] == pytest.approx(1400.0 - 1700.0, abs=1e-9)
    assert rep.cvar[0] == pytest.approx(1400.0 - 1350.0, abs=1e-7)


@pytest.mark.parametrize("kind", KINDS)
def test_cvar_at_least_var(eff, kind):
    measure = implied_survival(smooth_call_curve(eff, kind, delta=5.0))
    rep = var_cvar(measure, 1378.7, levels=(0.01, 0.025, 0.05, 0.1, 0.5, 1.0))
    assert all(c >= v - 1e-9 for c, v in zip(rep.cvar, rep.var))
    assert rep.window == (eff.strikes[1], eff.strikes[-1])
    assert np.all(np.diff(rep.quantiles) >= 0)


def test_var_cvar_on_step_measure():
    eff = efficient_set(random_quotes(np.random.default_rng(5), 12))
    rep = var_cvar(step_measure(eff), 150.0, levels=(0.05, 0.5))
    # quantiles of a step measure sit on efficient strikes
    for q in rep.quantiles:
        assert np.min(np.abs(eff.strikes - q)) < 1e-9
    assert all(c >= v - 1e-12 for c, v in zip(rep.cvar, rep.var))


def test_var_cvar_errors():
    m = uniform_measure()
    with pytest.raises(DegenerateMeasureError):
        var_cvar(m, 1400.0, window=(1800.0, 1900.0))
    with pytest.raises(ConfigurationError):
        var_cvar(m, 0.0)
    with pytest.raises(ConfigurationError):
        var_cvar(m, 1400.0, levels=(0.0,))
