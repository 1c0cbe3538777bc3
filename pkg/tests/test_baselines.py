import numpy as np
import pytest

from nbeats_forecasting.baselines import (
    BASELINES,
    baseline_forecast,
    decompose,
    fit_ses_alpha,
    naive,
    naive2,
    seasonal_naive,
    seasonality_test,
    ses,
    theta,
    theta_components
)
from nbeats_forecasting.data import SeriesFamily, synth_corpus
from nbeats_forecasting.metrics import smape_m3


def _seasonal_series(n: int = 96, m: int = 12, level: float = 100.0) -> np.ndarray:
    k = np.arange(n)
    return level * (1 + 0.3 * np.sin(2 * np.pi * k / m))


def test_naive_and_seasonal_naive():
    insample = np.array([4.0, 1.0, 2.0, 3.0, 5.0])
    assert naive(insample, 3).tolist() == [5.0, 5.0, 5.0]
    assert seasonal_naive(insample, 5, 2).tolist() == [3.0, 5.0, 3.0, 5.0, 3.0]
    assert seasonal_naive(insample, 2, 1).tolist() == [5.0, 5.0]
    with pytest.raises(ValueError):
        seasonal_naive(insample, 2, 6)
    with pytest.raises(ValueError):
        naive(np.array([]), 2)


def test_seasonality_test_detects_strong_seasonality():
    assert seasonality_test(_seasonal_series(), 12)
    assert not seasonality_test(_seasonal_series(), 1)
    assert not seasonality_test(np.full(48, 3.0), 12)
    # fewer than two seasons are never tested
    assert not seasonality_test(_seasonal_series(n=20), 12)


def test_decomposition_indices_average_to_one():
    result = decompose(_seasonal_series(), 12)
    assert result.seasonality_detected
    assert np.mean(result.indices) == pytest.approx(1.0, rel=1e-12)
    assert len(result.deseasonalized) == 96


def test_decomposition_falls_back_on_non_positive_values():
    series = _seasonal_series() - 100.0
    result = decompose(series, 12)
    assert result.fallback and not result.seasonality_detected
    assert np.array_equal(result.deseasonalized, series)


def test_naive2_reproduces_pure_seasonality():
    series = _seasonal_series(n=120)
    forecast = naive2(series[:108], 12, 12)
    assert np.allclose(forecast, series[108:], rtol=0.05)


def test_naive2_without_seasonality_is_naive():
    insample = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0])
    assert np.array_equal(naive2(insample, 4, 1), naive(insample, 4))


def test_ses_alpha_grid():
    # a random walk is best tracked with the largest smoothing parameter
    walk = np.cumsum(np.random.default_rng(0).normal(size=200)) + 50
    assert fit_ses_alpha(walk) >= 0.75
    flat_with_noise = 10 + np.random.default_rng(1).normal(scale=0.1, size=200)
    assert fit_ses_alpha(flat_with_noise) <= 0.2
    with pytest.raises(ValueError):
        fit_ses_alpha(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        ses(np.array([1.0, 2.0, 3.0]), 2, alpha=1.5)


def test_theta_continues_a_linear_series():
    series = 10.0 + 2.0 * np.arange(30)
    forecast = theta(series, 4, 1)
    assert np.max(np.abs(forecast - np.array([70.0, 72.0, 74.0, 76.0]))) < 1e-6
    theta0, theta2, _ = theta_components(series, 4, 1)
    assert np.allclose(theta0, theta2, atol=1e-6)


def test_theta_of_a_seasonal_trend_stays_close_to_a_reference_implementation():
    theta_model = pytest.importorskip("statsmodels.tsa.forecasting.theta")
    family = SeriesFamily("monthly", horizon=18, length=(68, 144), trend=(0.0, 0.01), seed=5)
    ours, reference = [], []
    for ts in synth_corpus(family, 50).series:
        insample, y = ts.values[:-18], ts.values[-18:]
        ours.append(smape_m3(y, theta(insample, 18, 12)))
        fitted = theta_model.ThetaModel(insample, period=12).fit()
        reference.append(smape_m3(y, np.asarray(fitted.forecast(18))))
    assert abs(np.mean(ours) - np.mean(reference)) < 2.0


@pytest.mark.parametrize("c", [0.5, 7.0, 1e3])
def test_baselines_are_scale_homogeneous(c):
    insample = _seasonal_series(n=72) + np.random.default_rng(4).normal(scale=2.0, size=72) + 0.5 * np.arange(72)
    for name in BASELINES:
        assert np.allclose(
            baseline_forecast(name, c * insample, 6, 12),
            c * baseline_forecast(name, insample, 6, 12),
            rtol=1e-9
        ), name


def test_naive2_on_white_noise_is_naive():
    detected = 0
    for seed in range(20):
        noise = 100.0 + np.random.default_rng(seed).normal(size=120)
        result = decompose(noise, 12)
        if result.seasonality_detected:
            detected += 1
            continue
        assert np.allclose(naive2(noise, 12, 12), naive(noise, 12), rtol=1e-12)
    # the test works at 90% confidence, so a few false detections are expected
    assert detected <= 6


def test_baseline_registry():
    insample = _seasonal_series(n=60)
    for name in BASELINES:
        forecast = baseline_forecast(name, insample, 6, 12)
        assert forecast.shape == (6,)
        assert np.all(np.isfinite(forecast))
    with pytest.raises(ValueError):
        baseline_forecast("arima", insample, 6, 12)
