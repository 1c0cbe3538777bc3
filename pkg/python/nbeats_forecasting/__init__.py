# flake8: noqa
from nbeats_forecasting.version import __version__

from nbeats_forecasting import (
    api,
    modules,
    logging,
    configuration,
    baselines,
    data,
    diagnostics,
    metrics,
    mask,
    io
)
from nbeats_forecasting.api.cli import ForecastingCli
from nbeats_forecasting.api.ensemble import EnsembleSpec, ensemble_forecast, train_ensemble
from nbeats_forecasting.api.evaluation import EvalReport, SweepTable, block_sweep, zero_shot_eval
from nbeats_forecasting.api.trainer import TrainConfig, Trainer, train
from nbeats_forecasting.api.utils import cpu_info, num_parameters
from nbeats_forecasting.modules.nbeats import ModelConfig, NBeatsModel, build_model, model_forward
