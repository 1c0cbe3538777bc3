import numpy as np
import pytest

from nbeats_forecasting.data import SeriesFamily, synth_corpus
from nbeats_forecasting.modules.nbeats import ModelConfig, build_model


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(22)


@pytest.fixture
def small_model():
    return build_model(ModelConfig(horizon=4, lookback=2, block_count=4, layers=2, width=16), seed=0)


@pytest.fixture
def tiny_family() -> SeriesFamily:
    return SeriesFamily(name="tiny", horizon=4, period=4, length=(24, 40), seed=3)


@pytest.fixture
def tiny_corpus(tiny_family):
    return synth_corpus(tiny_family, 16)
