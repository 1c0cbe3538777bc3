import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nbeats_forecasting.baselines import naive2
from nbeats_forecasting.metrics import (
    Metric,
    MetricConfig,
    evaluate,
    mape,
    mase,
    nd,
    owa,
    smape,
    smape_m3
)

_values = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
_positive = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False, allow_infinity=False)


def _random_corpus(seed: int, n: int = 20, m: int = 12, horizon: int = 6):
    rng = np.random.default_rng(seed)
    histories, targets = [], []
    for _ in range(n):
        length = int(rng.integers(3 * m, 6 * m))
        k = np.arange(length + horizon)
        values = rng.uniform(10, 100) * (1 + 0.2 * np.sin(2 * np.pi * k / m)) + rng.normal(0, 2, size=len(k))
        values = np.abs(values) + 1.0
        histories.append(values[:length])
        targets.append(values[length:])
    return histories, targets


@settings(max_examples=50, deadline=None)
@given(
    y=arrays(np.float64, 8, elements=_values),
    y_hat=arrays(np.float64, 8, elements=_values)
)
def test_smape_is_bounded(y, y_hat):
    assert 0.0 <= smape(y, y_hat) <= 200.0


@settings(max_examples=50, deadline=None)
@given(
    y=arrays(np.float64, 6, elements=_positive),
    y_hat=arrays(np.float64, 6, elements=_positive)
)
def test_smape_variants_agree_on_positive_values(y, y_hat):
    assert smape(y, y_hat) == pytest.approx(smape_m3(y, y_hat), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_owa_of_naive2_against_itself(seed):
    histories, targets = _random_corpus(seed)
    forecasts = [naive2(h, len(y), 12) for h, y in zip(histories, targets)]
    result = evaluate(MetricConfig(Metric.OWA, 12), targets, forecasts, histories, forecasts)
    assert abs(result.aggregate - 1.0) < 1e-12


@pytest.mark.parametrize("c", [1e-3, 0.5, 7.0, 1e4])
def test_scale_invariance(c):
    histories, targets = _random_corpus(1)
    rng = np.random.default_rng(2)
    forecasts = [y * rng.uniform(0.8, 1.2, size=len(y)) for y in targets]
    naive2_forecasts = [naive2(h, len(y), 12) for h, y in zip(histories, targets)]

    def _scaled(values):
        return [c * v for v in values]

    for metric in [Metric.ND, Metric.MASE, Metric.OWA, Metric.SMAPE, Metric.MAPE]:
        cfg = MetricConfig(metric, 12)
        base = evaluate(cfg, targets, forecasts, histories, naive2_forecasts).aggregate
        scaled = evaluate(
            cfg, _scaled(targets), _scaled(forecasts), _scaled(histories), _scaled(naive2_forecasts)
        ).aggregate
        assert scaled == pytest.approx(base, rel=1e-12), metric


def test_metric_examples():
    assert smape(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert smape(np.array([100.0]), np.array([50.0])) == pytest.approx(200.0 / 3)
    assert mape(np.array([200.0]), np.array([150.0])) == 25.0
    assert mape(np.array([0.0]), np.array([5.0])) == 0.0
    assert mase(np.array([5.0]), np.array([4.0]), np.array([1.0, 2.0, 3.0, 4.0]), 1) == 1.0
    assert owa(8.0, 1.2, 10.0, 1.0) == pytest.approx(1.0)


def test_mase_of_seasonal_continuation_is_zero():
    season = np.array([1.0, 3.0, 2.0, 5.0])
    insample = np.tile(season, 4)
    assert mase(season, season, insample + np.linspace(0, 1, 16), 4) == 0.0


def test_mase_errors():
    with pytest.raises(ValueError, match="flat seasonal history"):
        mase(np.array([2.0]), np.array([1.0]), np.array([2.0, 2.0, 2.0]), 1)
    with pytest.raises(ValueError):
        mase(np.array([2.0]), np.array([1.0]), np.array([2.0]), 1)
    with pytest.raises(ValueError):
        smape(np.array([1.0, 2.0]), np.array([1.0]))


def test_nd_pools_over_series():
    y = [np.array([1.0, 1.0]), np.array([100.0])]
    y_hat = [np.array([0.0, 0.0]), np.array([100.0])]
    assert nd(y, y_hat) == pytest.approx(2.0 / 102.0)
    result = evaluate(MetricConfig("nd"), y, y_hat)
    assert result.values.tolist() == [1.0, 0.0]
    assert result.aggregate == pytest.approx(2.0 / 102.0)
    with pytest.raises(ValueError):
        nd([np.zeros(2)], [np.ones(2)])


def test_owa_needs_naive2():
    histories, targets = _random_corpus(0, n=3)
    with pytest.raises(ValueError):
        evaluate(MetricConfig("owa", 12), targets, targets, histories)
    with pytest.raises(ValueError):
        owa(1.0, 1.0, 0.0, 1.0)


def test_per_series_owa_averages_to_aggregate():
    histories, targets = _random_corpus(3)
    rng = np.random.default_rng(0)
    forecasts = [y + rng.normal(0, 3, size=len(y)) for y in targets]
    naive2_forecasts = [naive2(h, len(y), 12) for h, y in zip(histories, targets)]
    result = evaluate(MetricConfig("owa", 12), targets, forecasts, histories, naive2_forecasts)
    assert float(np.mean(result.values)) == pytest.approx(result.aggregate, rel=1e-12)


def test_unknown_metric():
    with pytest.raises(ValueError):
        Metric.parse("rmse")
    with pytest.raises(ValueError):
        MetricConfig("mase", seasonality=0)
