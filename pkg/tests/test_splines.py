import numpy as np
import pytest

from dcselect.splines import smooth_fit


def test_recovers_smooth_signal():
    rng = np.random.default_rng(0)
    x = rng.uniform(-2.0, 2.0, size=300)
    truth = np.sin(1.5 * x)
    y = truth + 0.2 * rng.normal(size=300)
    fit = smooth_fit(x, y)
    assert np.sqrt(np.mean((fit.fitted - truth) ** 2)) < 0.08
    assert 2.0 <= fit.edf <= 8.0 + 1e-9


def test_linear_data_stays_near_linear():
    rng = np.random.default_rng(1)
    x = rng.uniform(0.0, 1.0, size=200)
    y = 3.0 * x - 1.0 + 0.05 * rng.normal(size=200)
    fit = smooth_fit(x, y)
    # GCV should pick heavy smoothing; the fit is essentially the LS line
    coef = np.polyfit(x, y, 1)
    line = np.polyval(coef, x)
    assert np.max(np.abs(fit.fitted - line)) < 0.05


def test_df_cap_respected():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1.0, 1.0, size=400)
    y = np.sign(np.sin(9.0 * x)) + 0.05 * rng.normal(size=400)  # very wiggly
    fit = smooth_fit(x, y, max_df=5.0)
    assert fit.edf <= 5.0 + 1e-9


def test_linear_extrapolation_outside_range():
    rng = np.random.default_rng(3)
    x = rng.uniform(0.0, 1.0, size=200)
    y = x**2 + 0.01 * rng.normal(size=200)
    fit = smooth_fit(x, y)
    lo, hi = fit.x_min, fit.x_max
    outside = np.array([lo - 1.0, lo - 2.0, hi + 1.0, hi + 2.0])
    vals = fit.predict(outside)
    # linear beyond the boundary: equal slopes between successive points
    slope_lo = (fit.predict(np.array([lo]))[0] - vals[0]) / 1.0
    slope_lo2 = (vals[0] - vals[1]) / 1.0
    assert slope_lo == pytest.approx(slope_lo2, rel=1e-9)
    slope_hi = (vals[2] - fit.predict(np.array([hi]))[0]) / 1.0
    slope_hi2 = (vals[3] - vals[2]) / 1.0
    assert slope_hi == pytest.approx(slope_hi2, rel=1e-9)


def test_weighted_fit_downweights_outliers():
    rng = np.random.default_rng(4)
    x = np.linspace(0.0, 1.0, 100)
    y = x.copy()
    y[:5] += 20.0  # gross outliers
    w = np.ones(100)
    w[:5] = 1e-6
    fit = smooth_fit(x, y, weights=w)
    assert np.max(np.abs(fit.fitted[5:] - x[5:])) < 0.05


def test_fixed_lambda_reuse():
    rng = np.random.default_rng(5)
    x = rng.uniform(0.0, 1.0, size=150)
    y = np.sin(6.0 * x) + 0.1 * rng.normal(size=150)
    first = smooth_fit(x, y)
    second = smooth_fit(x, y, lam=first.lam)
    assert np.allclose(first.fitted, second.fitted)
    assert second.edf == pytest.approx(first.edf)
