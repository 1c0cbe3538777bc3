import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from nbeats_forecasting import io, logging, tensorboard
from nbeats_forecasting.api import utils
from nbeats_forecasting.data import HISTORY_SIZE, Corpus, sample_batch, stack_windows
from nbeats_forecasting.metrics import TRAINING_LOSSES, Metric
from nbeats_forecasting.modules.loss import loss_from_config
from nbeats_forecasting.modules.nbeats import (
    LOOKBACK_MULTIPLES,
    ModelConfig,
    NBeatsModel,
    build_model,
    model_forward
)
from nbeats_forecasting.modules.optimizer import adam_step, optimizer_from_config
from nbeats_forecasting.modules.tape import GradientTape, backward

__all__ = ["TrainConfig", "TrainResult", "Trainer", "train"]


@dataclass(frozen=True)
class TrainConfig:
    """

    Everything that determines a training run. Horizon and seasonality
    default to the ones of the training corpus.

    >>> TrainConfig(loss="mase").loss
    <Metric.MASE: 'mase'>

    """
    iterations: int = 15000
    batch_size: int = 1024
    lr: float = 1e-3
    loss: Metric = Metric.SMAPE
    lookback: int = 2
    seed: int = 0
    block_count: int = 30
    layers: int = 4
    width: int = 512
    share_weights: bool = False
    history_size: int = HISTORY_SIZE
    horizon: Optional[int] = None
    seasonality: Optional[int] = None
    log_interval: int = 100

    def __post_init__(self):
        object.__setattr__(self, "loss", Metric.parse(self.loss))
        if self.loss not in TRAINING_LOSSES:
            raise ValueError(f"{self.loss.value} is not a training loss, must be one of {[m.value for m in TRAINING_LOSSES]}")
        if self.lookback not in LOOKBACK_MULTIPLES:
            raise ValueError(f"lookback must be one of {LOOKBACK_MULTIPLES}, but got {self.lookback}")
        for name in ["iterations", "batch_size", "block_count", "layers", "width", "history_size", "log_interval"]:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, but got {getattr(self, name)}")
        if self.lr < 0:
            raise ValueError(f"learning rate must not be negative, but got {self.lr}")

    def model_config(self, horizon: int) -> ModelConfig:
        return ModelConfig(
            horizon=horizon,
            lookback=self.lookback,
            block_count=self.block_count,
            layers=self.layers,
            width=self.width,
            share_weights=self.share_weights
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "loss": self.loss.value,
            "lookback": self.lookback,
            "seed": self.seed,
            "block_count": self.block_count,
            "layers": self.layers,
            "width": self.width,
            "share_weights": self.share_weights,
            "history_size": self.history_size,
            "horizon": self.horizon,
            "seasonality": self.seasonality
        }


@dataclass
class TrainResult:
    model: NBeatsModel
    # mean training loss of every iteration
    losses: np.ndarray
    config: TrainConfig
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return io.model_digest(self.model)


class Trainer:
    """

    Trains a single N-BEATS model with Adam on windows sampled from the
    training region of a corpus. Inputs and targets are divided by the
    maximum of the input window, as at inference time.

    """

    def __init__(self, corpus: Corpus, cfg: TrainConfig, experiment_dir: Optional[str] = None):
        self.corpus = corpus
        self.cfg = cfg
        self.experiment_dir = experiment_dir
        self.logger = logging.get_logger("TRAIN")

        self.horizon = cfg.horizon if cfg.horizon is not None else corpus.horizon()
        if cfg.seasonality is not None:
            self.seasonality = cfg.seasonality
        else:
            self.seasonality = corpus.series[0].seasonality

        self.model = build_model(cfg.model_config(self.horizon), cfg.seed)
        self.state = optimizer_from_config({"type": "adam", "lr": cfg.lr})
        self.loss_fn = loss_from_config({"type": cfg.loss.value, "on_flat": "mask"})
        # sampling uses its own stream so it does not depend on the initialization
        self.rng = np.random.default_rng([cfg.seed, 1])
        self.step = 0
        self.losses: List[float] = []

        self.summary_writer = None
        self.file_log = None
        if experiment_dir is not None:
            os.makedirs(os.path.join(experiment_dir, "checkpoints"), exist_ok=True)
            self.file_log = logging.add_file_log(self.logger, os.path.join(experiment_dir, "logs.txt"))
            self.summary_writer = tensorboard.summary_writer(os.path.join(experiment_dir, "tensorboard"))
            self.logger.info(
                f"Type 'tensorboard --logdir {os.path.join(experiment_dir, 'tensorboard')}' "
                f"to view the training process in Tensorboard"
            )

        self.logger.debug(f"[seed {cfg.seed}] {utils.cpu_info()}")
        self.logger.debug(f"[seed {cfg.seed}] model parameters: {utils.num_parameters(self.model)}")

    def _train_step(self) -> float:
        cfg = self.cfg
        batch = stack_windows(sample_batch(
            self.corpus,
            self.model.input_size,
            self.horizon,
            cfg.batch_size,
            self.rng,
            cfg.history_size
        ))
        scale = np.max(batch.x, axis=1, keepdims=True)
        scale = np.where(scale == 0, 1.0, scale)
        x = batch.x / scale
        y = batch.y / scale

        tape = GradientTape()
        trace = model_forward(self.model, x, tape)
        loss = self.loss_fn(y, trace.forecast_node, tape, insample=x, m=self.seasonality, insample_mask=batch.mask)
        loss_value = float(loss.value)
        if not np.isfinite(loss_value):
            raise RuntimeError(f"got non-finite training loss {loss_value} at iteration {self.step}")

        grads = backward(tape, output=loss)
        params, self.state = adam_step(self.model.parameters(), grads, self.state)
        self.model = self.model.with_parameters(params)
        return loss_value

    def run(self) -> TrainResult:
        cfg = self.cfg
        mean_loss = tensorboard.AverageTracker(f"train_loss_{cfg.loss.value}", fmt=".4f")
        mean_step_time = tensorboard.AverageTracker("train_step_ms")
        begin = time.perf_counter()
        try:
            while self.step < cfg.iterations:
                start = time.perf_counter()
                loss_value = self._train_step()
                end = time.perf_counter()
                self.losses.append(loss_value)
                mean_loss.add(loss_value)
                mean_step_time.add((end - start) * 1000)
                self.step += 1

                if self.step % cfg.log_interval == 0 or self.step == cfg.iterations:
                    for tracker in [mean_loss, mean_step_time]:
                        tracker.log_tensorboard(self.summary_writer, self.step)
                        tracker.log_info(self.logger, self.step)
                        tracker.reset()
                    self.logger.info(
                        f"[seed {cfg.seed}] [step {self.step}] "
                        f"{logging.eta_minutes_message((end - begin) / 60, self.step, cfg.iterations)}"
                    )

            result = TrainResult(
                model=self.model,
                losses=np.asarray(self.losses, dtype=np.float64),
                config=cfg,
                meta={**cfg.to_dict(), "horizon": self.horizon, "seasonality": self.seasonality}
            )
            if self.experiment_dir is not None:
                ckpt_path = os.path.join(self.experiment_dir, "checkpoints", "checkpoint_last.nbf")
                digest = io.save_checkpoint(ckpt_path, result.model, result.meta)
                self.logger.info(f"saved checkpoint {ckpt_path} with digest {digest}")
            return result
        finally:
            if self.summary_writer is not None:
                self.summary_writer.close()
            if self.file_log is not None:
                self.logger.removeHandler(self.file_log)
                self.file_log.close()


def train(corpus: Corpus, cfg: TrainConfig, experiment_dir: Optional[str] = None) -> TrainResult:
    """

    Trains one model, deterministically given cfg.seed.

    :param corpus: training corpus, all series share one horizon
    :param cfg: training configuration
    :param experiment_dir: optional directory for logs, tensorboard events and the final checkpoint
    :return: trained model with its loss curve
    """
    return Trainer(corpus, cfg, experiment_dir).run()
