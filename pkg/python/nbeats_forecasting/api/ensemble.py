import logging as std_logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from nbeats_forecasting import logging, mask
from nbeats_forecasting.api import utils
from nbeats_forecasting.api.trainer import TrainConfig, TrainResult, train
from nbeats_forecasting.data import Corpus
from nbeats_forecasting.metrics import TRAINING_LOSSES, Metric
from nbeats_forecasting.modules.nbeats import LOOKBACK_MULTIPLES, NBeatsModel, scaled_forecast

__all__ = [
    "EnsembleSpec",
    "train_ensemble",
    "history_windows",
    "member_forecasts",
    "combine",
    "ensemble_forecast"
]

COMBINERS = ("median",)


@dataclass(frozen=True)
class EnsembleSpec:
    """

    Grid of ensemble members, one member per lookback, loss and repeat.

    >>> EnsembleSpec().size
    90
    >>> EnsembleSpec(lookbacks=(2, 3, 4), losses=("smape", "mase"), repeats=3).size
    18

    """
    lookbacks: Tuple[int, ...] = LOOKBACK_MULTIPLES
    losses: Tuple[Metric, ...] = TRAINING_LOSSES
    repeats: int = 5
    combiner: str = "median"

    def __post_init__(self):
        lookbacks = tuple(int(lb) for lb in self.lookbacks)
        losses = tuple(Metric.parse(loss) for loss in self.losses)
        if len(lookbacks) == 0 or len(losses) == 0:
            raise ValueError("an ensemble needs at least one lookback and one loss")
        for lookback in lookbacks:
            if lookback not in LOOKBACK_MULTIPLES:
                raise ValueError(f"lookback must be one of {LOOKBACK_MULTIPLES}, but got {lookback}")
        for loss in losses:
            if loss not in TRAINING_LOSSES:
                raise ValueError(f"{loss.value} is not a training loss")
        if self.repeats < 1:
            raise ValueError(f"repeats must be at least 1, but got {self.repeats}")
        if self.combiner not in COMBINERS:
            raise ValueError(f"unknown combiner {self.combiner}, must be one of {COMBINERS}")
        object.__setattr__(self, "lookbacks", lookbacks)
        object.__setattr__(self, "losses", losses)

    @property
    def size(self) -> int:
        return len(self.lookbacks) * len(self.losses) * self.repeats

    def member_configs(self, base: TrainConfig) -> List[TrainConfig]:
        """

        Training configs of all members, member i is seeded with base.seed + i.

        """
        configs = []
        for lookback in self.lookbacks:
            for loss in self.losses:
                for _ in range(self.repeats):
                    configs.append(replace(base, lookback=lookback, loss=loss, seed=base.seed + len(configs)))
        return configs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lookbacks": list(self.lookbacks),
            "losses": [loss.value for loss in self.losses],
            "repeats": self.repeats,
            "combiner": self.combiner
        }


def train_ensemble(
    corpus: Corpus,
    base: TrainConfig,
    spec: EnsembleSpec,
    workers: Optional[int] = None
) -> List[TrainResult]:
    """

    Trains every member of the ensemble in a thread pool. Members share no
    mutable state, so the results do not depend on the number of workers.

    :param corpus: training corpus
    :param base: config every member config is derived from
    :param spec: ensemble grid
    :param workers: number of threads, defaults to NBF_NUM_WORKERS or the core count
    :return: training results in member order
    """
    logger = logging.get_logger("ENSEMBLE")
    configs = spec.member_configs(base)
    workers = min(utils.default_workers(workers), len(configs))
    logger.info(f"training {len(configs)} members on {corpus.name} with {workers} workers")

    results: List[Optional[TrainResult]] = [None] * len(configs)
    pbar = utils.progress_bar(
        f"training {corpus.name} ensemble",
        len(configs),
        disable=logger.getEffectiveLevel() > std_logging.INFO
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(train, corpus, cfg): i for i, cfg in enumerate(configs)}
        try:
            for future in as_completed(futures):
                idx = futures[future]
                results[idx] = future.result()
                pbar.update(1)
                logger.debug(
                    f"member {idx} (lookback {configs[idx].lookback}, loss {configs[idx].loss.value}, "
                    f"seed {configs[idx].seed}) finished with loss {results[idx].losses[-1]:.4f}"
                )
        except BaseException:
            pool.shutdown(wait=True, cancel_futures=True)
            raise
        finally:
            pbar.close()
    assert all(r is not None for r in results), "some ensemble members did not finish"
    return results  # type: ignore[return-value]


def history_windows(histories: Sequence[np.ndarray], t: int) -> Tuple[np.ndarray, np.ndarray]:
    """

    Last t values of every history, left padded with zeros if shorter.

    >>> x, pad = history_windows([np.array([1.0, 2.0, 3.0]), np.array([4.0])], 2)
    >>> x.tolist(), pad.tolist()
    ([[2.0, 3.0], [0.0, 4.0]], [[False, False], [True, False]])

    :param histories: one history per series
    :param t: window size
    :return: windows [S x t] and left padding mask [S x t]
    """
    windows = np.zeros((len(histories), t))
    lengths = []
    for i, history in enumerate(histories):
        window = np.asarray(history, dtype=np.float64)[-t:]
        windows[i, t - len(window):] = window
        lengths.append(len(window))
    return windows, mask.left_padding_mask(lengths, t)


def _check_horizons(members: Sequence[NBeatsModel]) -> int:
    if len(members) == 0:
        raise ValueError("an ensemble needs at least one member")
    horizons = sorted({m.horizon for m in members})
    if len(horizons) != 1:
        raise ValueError(f"ensemble members disagree on the horizon, got horizons {horizons}")
    return horizons[0]


def member_forecasts(
    members: Sequence[NBeatsModel],
    histories: Sequence[np.ndarray],
    workers: Optional[int] = 1
) -> np.ndarray:
    """

    Forecasts of every member for every series. Each member sees the last
    lookback * H values of a history.

    :param members: trained models with equal horizon
    :param histories: one history per series
    :param workers: number of threads running members in parallel
    :return: forecasts [members x series x H]
    """
    _check_horizons(members)
    if len(histories) == 0:
        raise ValueError("got no series to forecast")

    def _forecast(member: NBeatsModel) -> np.ndarray:
        windows, _ = history_windows(histories, member.input_size)
        return scaled_forecast(member, windows)

    workers = min(utils.default_workers(workers), len(members))
    if workers == 1:
        forecasts = [_forecast(member) for member in members]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            forecasts = list(pool.map(_forecast, members))
    return np.stack(forecasts)


def combine(forecasts: np.ndarray, combiner: str = "median") -> np.ndarray:
    """

    Combines member forecasts along the first axis.

    >>> combine(np.array([[1.0], [3.0]])).tolist()
    [2.0]

    """
    if combiner != "median":
        raise ValueError(f"unknown combiner {combiner}, must be one of {COMBINERS}")
    return np.median(forecasts, axis=0)


def ensemble_forecast(members: Sequence[NBeatsModel], window: np.ndarray) -> np.ndarray:
    """

    Elementwise median of the member forecasts for a single history window.

    :param members: trained models with equal horizon
    :param window: history of the series, at least one value
    :return: forecast [H]
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1 or len(window) == 0:
        raise ValueError(f"expected a non-empty one dimensional window, but got shape {window.shape}")
    return combine(member_forecasts(members, [window])[:, 0])
