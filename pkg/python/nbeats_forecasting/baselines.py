"""

Classical statistical forecasters used as comparison points and as the
Naive2 reference of OWA. Every function takes the in-sample history and
returns a forecast of H values.

"""
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from statsmodels.tsa.seasonal import seasonal_decompose
from statsmodels.tsa.stattools import acf

__all__ = [
    "DecompositionResult",
    "naive",
    "seasonal_naive",
    "seasonality_test",
    "decompose",
    "naive2",
    "fit_ses_alpha",
    "ses",
    "theta_components",
    "theta",
    "BASELINES",
    "baseline_forecast"
]

# one-sided 90% critical value of the seasonality test
SEASONALITY_CRITICAL_VALUE = 1.645
SES_ALPHA_GRID = np.round(np.arange(1, 100) / 100, 2)


def _history(insample: np.ndarray) -> np.ndarray:
    insample = np.asarray(insample, dtype=np.float64)
    if insample.ndim != 1 or len(insample) == 0:
        raise ValueError(f"expected a non-empty one dimensional history, but got shape {insample.shape}")
    return insample


def naive(insample: np.ndarray, horizon: int) -> np.ndarray:
    """

    >>> naive(np.array([1.0, 2.0, 3.0]), 2).tolist()
    [3.0, 3.0]

    """
    insample = _history(insample)
    return np.full(horizon, insample[-1])


def seasonal_naive(insample: np.ndarray, horizon: int, m: int) -> np.ndarray:
    """

    Repeats the last observed season.

    >>> seasonal_naive(np.array([1.0, 2.0, 3.0, 4.0]), 3, 2).tolist()
    [3.0, 4.0, 3.0]

    """
    insample = _history(insample)
    if m < 1:
        raise ValueError(f"seasonality must be at least 1, but got {m}")
    if len(insample) < m:
        raise ValueError(f"history of length {len(insample)} is shorter than the seasonality {m}")
    last_season = insample[len(insample) - m:]
    return last_season[np.arange(horizon) % m].copy()


def seasonality_test(insample: np.ndarray, m: int) -> bool:
    """

    Lag m autocorrelation test at 90% confidence, as used for Naive2 in the
    M4 competition. Needs at least two full seasons.

    """
    insample = _history(insample)
    n = len(insample)
    if m <= 1 or n < 2 * m or np.std(insample) == 0:
        return False
    rho = acf(insample, nlags=m, fft=False)
    limit = SEASONALITY_CRITICAL_VALUE * np.sqrt((1 + 2 * np.sum(np.square(rho[1:m]))) / n)
    return bool(abs(rho[m]) > limit)


@dataclass(frozen=True)
class DecompositionResult:
    # multiplicative seasonal index of each phase, phase j covers positions k with k % m == j
    indices: np.ndarray
    deseasonalized: np.ndarray
    seasonality_detected: bool
    # set when non-positive values made a multiplicative decomposition impossible
    fallback: bool = False

    def reseasonalize(self, forecast: np.ndarray, start: int) -> np.ndarray:
        """

        Applies the seasonal indices to a forecast whose first value sits at
        position start of the series.

        """
        m = len(self.indices)
        return forecast * self.indices[(start + np.arange(len(forecast))) % m]


def decompose(insample: np.ndarray, m: int) -> DecompositionResult:
    """

    Classical multiplicative decomposition with a centered moving average
    trend, applied only if the seasonality test passes.

    >>> result = decompose(np.array([1.0, 2.0, 3.0]), 1)
    >>> result.seasonality_detected, result.indices.tolist()
    (False, [1.0])

    """
    insample = _history(insample)
    m = max(1, int(m))
    no_adjustment = DecompositionResult(np.ones(m), insample.copy(), False)
    if not seasonality_test(insample, m):
        return no_adjustment
    if np.any(insample <= 0):
        return DecompositionResult(np.ones(m), insample.copy(), False, fallback=True)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        seasonal = np.asarray(seasonal_decompose(insample, model="multiplicative", period=m).seasonal)
    indices = seasonal[:m] / np.mean(seasonal[:m])
    return DecompositionResult(indices, insample / indices[np.arange(len(insample)) % m], True)


def naive2(insample: np.ndarray, horizon: int, m: int) -> np.ndarray:
    """

    Naive forecast of the seasonally adjusted history, reseasonalized.

    >>> naive2(np.array([1.0, 2.0, 3.0]), 2, 1).tolist()
    [3.0, 3.0]

    """
    result = decompose(insample, m)
    return result.reseasonalize(naive(result.deseasonalized, horizon), len(result.deseasonalized))


def _ses_levels(insample: np.ndarray, alphas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # level starts at the first value, one level per alpha
    level = np.full(len(alphas), insample[0])
    sse = np.zeros(len(alphas))
    for value in insample[1:]:
        sse += np.square(value - level)
        level = alphas * value + (1 - alphas) * level
    return level, sse


def fit_ses_alpha(insample: np.ndarray) -> float:
    """

    Smoothing parameter on the grid 0.01, 0.02, ..., 0.99 with the smallest
    in-sample one-step squared error. Ties go to the smallest alpha.

    """
    insample = _history(insample)
    if len(insample) < 3:
        raise ValueError(f"fitting the smoothing parameter needs at least 3 values, but got {len(insample)}")
    _, sse = _ses_levels(insample, SES_ALPHA_GRID)
    return float(SES_ALPHA_GRID[int(np.argmin(sse))])


def ses(insample: np.ndarray, horizon: int, alpha: Optional[float] = None) -> np.ndarray:
    """

    Simple exponential smoothing with a flat forecast at the final level.
    Without alpha the smoothing parameter is fitted on the grid.

    >>> ses(np.array([1.0, 5.0, 2.0]), 2, alpha=1.0).tolist()
    [2.0, 2.0]
    >>> ses(np.array([1.0, 5.0, 2.0]), 2, alpha=0.0).tolist()
    [1.0, 1.0]

    """
    insample = _history(insample)
    if alpha is None:
        alpha = fit_ses_alpha(insample)
    if not 0 <= alpha <= 1:
        raise ValueError(f"smoothing parameter must be in [0, 1], but got {alpha}")
    level, _ = _ses_levels(insample, np.array([alpha]))
    return np.full(horizon, level[0])


def theta_components(insample: np.ndarray, horizon: int, m: int) -> Tuple[np.ndarray, np.ndarray, DecompositionResult]:
    """

    Forecasts of the theta=0 line (linear regression on time, extrapolated)
    and of the theta=2 line (twice the series minus the regression line),
    both on the seasonally adjusted history. The theta=2 line has the same
    regression line as the series, so it is extrapolated with that drift
    plus an SES forecast of its deviation from the drift.

    :param insample: history
    :param horizon: forecast horizon
    :param m: seasonality
    :return: theta=0 forecast, theta=2 forecast and the decomposition used
    """
    insample = _history(insample)
    if len(insample) < 4:
        raise ValueError(f"theta needs at least 4 values, but got {len(insample)}")
    decomposition = decompose(insample, m)
    adjusted = decomposition.deseasonalized
    n = len(adjusted)
    k = np.arange(n, dtype=np.float64)
    slope, intercept = np.polyfit(k, adjusted, deg=1)
    fitted = intercept + slope * k
    theta0 = intercept + slope * np.arange(n, n + horizon, dtype=np.float64)
    theta2_line = 2 * adjusted - fitted
    # the deviation is zero for a linear history, which continues the line exactly
    theta2 = theta0 + ses(theta2_line - fitted, horizon)
    return theta0, theta2, decomposition


def theta(insample: np.ndarray, horizon: int, m: int) -> np.ndarray:
    """

    Classical Theta method averaging the theta=0 and theta=2 forecasts,
    reseasonalized.

    >>> theta(np.full(8, 5.0), 3, 1).round(9).tolist()
    [5.0, 5.0, 5.0]

    """
    theta0, theta2, decomposition = theta_components(insample, horizon, m)
    return decomposition.reseasonalize(0.5 * (theta0 + theta2), len(decomposition.deseasonalized))


BaselineFn = Callable[[np.ndarray, int, int], np.ndarray]

BASELINES: Dict[str, BaselineFn] = {
    "naive": lambda insample, horizon, m: naive(insample, horizon),
    "seasonal_naive": seasonal_naive,
    "naive2": naive2,
    "ses": lambda insample, horizon, m: ses(insample, horizon),
    "theta": theta
}


def baseline_forecast(name: str, insample: np.ndarray, horizon: int, m: int) -> np.ndarray:
    if name not in BASELINES:
        raise ValueError(f"unknown baseline {name}, must be one of {sorted(BASELINES)}")
    return BASELINES[name](insample, horizon, m)
