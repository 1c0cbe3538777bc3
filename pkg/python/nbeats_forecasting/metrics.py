"""

Evaluation metrics on numpy arrays. All percentage metrics use a denominator
guard: a term whose denominator is below eps contributes 0 while the divisor
stays the full horizon.

"""
import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from nbeats_forecasting.data import Frequency

EPS = 1e-8


class Metric(str, enum.Enum):
    SMAPE = "smape"
    SMAPE_M3 = "smape_m3"
    MAPE = "mape"
    MASE = "mase"
    OWA = "owa"
    ND = "nd"

    @classmethod
    def parse(cls, name: Union[str, "Metric"]) -> "Metric":
        if isinstance(name, Metric):
            return name
        key = str(name).strip().lower()
        for metric in cls:
            if metric.value == key:
                return metric
        raise ValueError(f"unknown metric {name}, must be one of {[m.value for m in cls]}")


TRAINING_LOSSES = (Metric.SMAPE, Metric.MAPE, Metric.MASE)


def seasonality(frequency: Union[str, Frequency]) -> int:
    """

    Seasonal period m of a frequency split, following the M4 convention.

    >>> seasonality("Monthly"), seasonality("Hourly"), seasonality("Weekly")
    (12, 24, 1)

    """
    return Frequency.parse(frequency).seasonality


def _check(y: np.ndarray, y_hat: np.ndarray) -> None:
    if y.shape != y_hat.shape:
        raise ValueError(f"target of shape {y.shape} does not match forecast of shape {y_hat.shape}")
    if y.size == 0:
        raise ValueError("got an empty target")


def _guarded_ratio(num: np.ndarray, denom: np.ndarray, eps: float) -> np.ndarray:
    valid = denom >= eps
    return np.where(valid, num / np.where(valid, denom, 1.0), 0.0)


def smape(y: np.ndarray, y_hat: np.ndarray, eps: float = EPS) -> float:
    """

    >>> round(smape(np.array([100.0]), np.array([50.0])), 6)
    66.666667
    >>> smape(np.array([0.0]), np.array([0.0]))
    0.0

    """
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    _check(y, y_hat)
    terms = _guarded_ratio(np.abs(y - y_hat), np.abs(y) + np.abs(y_hat), eps)
    return float(200.0 * np.mean(terms))


def smape_m3(y: np.ndarray, y_hat: np.ndarray, eps: float = EPS) -> float:
    """

    M3 variant of sMAPE without absolute values in the denominator.

    >>> smape_m3(np.array([1.0]), np.array([-1.0]))
    0.0

    """
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    _check(y, y_hat)
    terms = _guarded_ratio(np.abs(y - y_hat), y + y_hat, eps)
    return float(200.0 * np.mean(terms))


def mape(y: np.ndarray, y_hat: np.ndarray, eps: float = EPS) -> float:
    """

    >>> mape(np.array([200.0]), np.array([150.0]))
    25.0

    """
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    _check(y, y_hat)
    terms = _guarded_ratio(np.abs(y - y_hat), np.abs(y), eps)
    return float(100.0 * np.mean(terms))


def mase_scale(insample: np.ndarray, y: np.ndarray, m: int) -> float:
    """

    Mean absolute seasonal difference over the history followed by the target.

    """
    full = np.concatenate([np.asarray(insample, dtype=np.float64), np.asarray(y, dtype=np.float64)])
    if len(full) <= m:
        return 0.0
    return float(np.mean(np.abs(full[m:] - full[:-m])))


def mase(y: np.ndarray, y_hat: np.ndarray, insample: np.ndarray, m: int, eps: float = EPS) -> float:
    """

    >>> mase(np.array([5.0]), np.array([4.0]), np.array([1.0, 2.0, 3.0, 4.0]), 1)
    1.0

    """
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    _check(y, y_hat)
    if m < 1:
        raise ValueError(f"seasonality must be at least 1, but got {m}")
    insample = np.asarray(insample, dtype=np.float64)
    if len(insample) <= m:
        raise ValueError(f"history of length {len(insample)} is too short for seasonality {m}")
    scale = mase_scale(insample, y, m)
    if scale < eps:
        raise ValueError("flat seasonal history, MASE is undefined")
    return float(np.mean(np.abs(y - y_hat)) / scale)


def owa(smape_model: float, mase_model: float, smape_naive2: float, mase_naive2: float) -> float:
    """

    >>> round(owa(8.0, 1.2, 10.0, 1.0), 12)
    1.0

    """
    if smape_naive2 <= 0 or mase_naive2 <= 0:
        raise ValueError(f"OWA needs positive Naive2 references, but got sMAPE {smape_naive2} and MASE {mase_naive2}")
    if smape_model < 0 or mase_model < 0:
        raise ValueError(f"got negative model metrics sMAPE {smape_model} and MASE {mase_model}")
    return 0.5 * (smape_model / smape_naive2 + mase_model / mase_naive2)


def nd(y_all: Sequence[np.ndarray], y_hat_all: Sequence[np.ndarray], eps: float = EPS) -> float:
    """

    Normalized deviation, the ratio of summed absolute errors over summed
    absolute targets across all series and steps.

    >>> nd([np.array([10.0]), np.array([10.0])], [np.array([9.0]), np.array([12.0])])
    0.15

    """
    if len(y_all) != len(y_hat_all):
        raise ValueError(f"got {len(y_all)} targets but {len(y_hat_all)} forecasts")
    num = 0.0
    denom = 0.0
    for y, y_hat in zip(y_all, y_hat_all):
        y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
        _check(y, y_hat)
        num += float(np.sum(np.abs(y - y_hat)))
        denom += float(np.sum(np.abs(y)))
    if denom < eps:
        raise ValueError("sum of absolute targets is zero, ND is undefined")
    return num / denom


@dataclass(frozen=True)
class MetricConfig:
    metric: Metric
    seasonality: int = 1
    eps: float = EPS

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric.parse(self.metric))
        if self.seasonality < 1:
            raise ValueError(f"seasonality must be at least 1, but got {self.seasonality}")


@dataclass(frozen=True)
class MetricResult:
    metric: Metric
    values: np.ndarray
    aggregate: float

    def __len__(self) -> int:
        return len(self.values)


def evaluate(
    cfg: MetricConfig,
    targets: Sequence[np.ndarray],
    forecasts: Sequence[np.ndarray],
    insamples: Optional[Sequence[np.ndarray]] = None,
    naive2_forecasts: Optional[Sequence[np.ndarray]] = None
) -> MetricResult:
    """

    Per-series values and the aggregate of a metric. sMAPE, sMAPE_M3, MAPE and
    MASE aggregate by the mean over series, ND by the ratio of sums. OWA is
    computed from the aggregate sMAPE and MASE of the model and of Naive2;
    the per-series values are the model's sMAPE and MASE divided by the
    Naive2 aggregates, so their mean equals the aggregate.

    :param cfg: metric configuration
    :param targets: held-out values per series
    :param forecasts: forecasts per series
    :param insamples: histories per series, needed for MASE and OWA
    :param naive2_forecasts: Naive2 forecasts per series, needed for OWA
    :return: metric result
    """
    if len(targets) != len(forecasts):
        raise ValueError(f"got {len(targets)} targets but {len(forecasts)} forecasts")
    if len(targets) == 0:
        raise ValueError("got no series to evaluate")
    metric = cfg.metric

    def _need(values, what: str):
        if values is None or len(values) != len(targets):
            raise ValueError(f"{metric.value} needs {what} for every series")
        return values

    if metric == Metric.SMAPE:
        values = np.array([smape(y, f, cfg.eps) for y, f in zip(targets, forecasts)])
    elif metric == Metric.SMAPE_M3:
        values = np.array([smape_m3(y, f, cfg.eps) for y, f in zip(targets, forecasts)])
    elif metric == Metric.MAPE:
        values = np.array([mape(y, f, cfg.eps) for y, f in zip(targets, forecasts)])
    elif metric == Metric.MASE:
        insamples = _need(insamples, "histories")
        values = np.array([
            mase(y, f, h, cfg.seasonality, cfg.eps) for y, f, h in zip(targets, forecasts, insamples)
        ])
    elif metric == Metric.ND:
        per_series = []
        for y, f in zip(targets, forecasts):
            denom = float(np.sum(np.abs(y)))
            per_series.append(float(np.sum(np.abs(np.asarray(y) - np.asarray(f)))) / denom if denom >= cfg.eps else 0.0)
        return MetricResult(metric, np.array(per_series), nd(targets, forecasts, cfg.eps))
    elif metric == Metric.OWA:
        insamples = _need(insamples, "histories")
        naive2_forecasts = _need(naive2_forecasts, "Naive2 forecasts")
        smape_cfg = MetricConfig(Metric.SMAPE, cfg.seasonality, cfg.eps)
        mase_cfg = MetricConfig(Metric.MASE, cfg.seasonality, cfg.eps)
        model_smape = evaluate(smape_cfg, targets, forecasts)
        model_mase = evaluate(mase_cfg, targets, forecasts, insamples)
        naive2_smape = evaluate(smape_cfg, targets, naive2_forecasts).aggregate
        naive2_mase = evaluate(mase_cfg, targets, naive2_forecasts, insamples).aggregate
        aggregate = owa(model_smape.aggregate, model_mase.aggregate, naive2_smape, naive2_mase)
        values = 0.5 * (model_smape.values / naive2_smape + model_mase.values / naive2_mase)
        return MetricResult(metric, values, aggregate)
    else:
        raise ValueError(f"unknown metric {metric}")
    return MetricResult(metric, values, float(np.mean(values)))
