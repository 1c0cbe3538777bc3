import json
import os

import numpy as np
import pytest

from nbeats_forecasting import io
from nbeats_forecasting.modules.nbeats import ModelConfig, build_model, model_forward


@pytest.mark.parametrize("share_weights", [False, True])
def test_checkpoint_round_trip(tmp_path, share_weights):
    model = build_model(ModelConfig(horizon=3, lookback=4, block_count=3, layers=2, width=8, share_weights=share_weights), 5)
    path = str(tmp_path / "model.nbf")
    digest = io.save_checkpoint(path, model, {"loss": "smape"})
    loaded, meta = io.load_checkpoint(path)
    assert meta == {"loss": "smape"}
    assert digest == io.model_digest(loaded)
    assert loaded.config == model.config and loaded.seed == 5
    x = np.random.default_rng(0).uniform(size=(4, model.input_size))
    assert np.array_equal(model_forward(model, x).forecast, model_forward(loaded, x).forecast)


def test_checkpoint_layout(tmp_path, small_model):
    path = str(tmp_path / "model.nbf")
    io.save_checkpoint(path, small_model)
    with open(path, "rb") as inf:
        raw = inf.read()
    length = int.from_bytes(raw[:8], "little")
    manifest = json.loads(raw[8:8 + length])
    assert manifest["L"] == 4 and manifest["H"] == 4 and manifest["t"] == 8
    assert [b["name"] for b in manifest["blobs"]] == list(small_model.parameters())
    assert len(raw) == 8 + length + sum(b["nbytes"] for b in manifest["blobs"])


def test_corrupted_checkpoint_is_rejected(tmp_path, small_model):
    path = str(tmp_path / "model.nbf")
    io.save_checkpoint(path, small_model)
    with open(path, "rb") as inf:
        raw = bytearray(inf.read())
    raw[-3] ^= 0xFF
    with open(path, "wb") as of:
        of.write(bytes(raw))
    with pytest.raises(ValueError, match="checksum mismatch"):
        io.load_checkpoint(path)
    with pytest.raises(FileNotFoundError):
        io.load_checkpoint(str(tmp_path / "missing.nbf"))


def test_digest_changes_with_parameters(small_model):
    params = small_model.parameters()
    params["blocks.0.forecast"] = params["blocks.0.forecast"] + 1e-12
    assert io.model_digest(small_model) != io.model_digest(small_model.with_parameters(params))
    assert io.model_digest(small_model) == io.model_digest(build_model(small_model.config, seed=0))


def test_atomic_write_leaves_nothing_on_error(tmp_path):
    path = tmp_path / "out.json"
    with pytest.raises(RuntimeError):
        with io.atomic_write(str(path)) as of:
            of.write("partial")
            raise RuntimeError("interrupted")
    assert os.listdir(tmp_path) == []
    io.write_json(str(path), {"b": 1, "a": [1, 2]})
    assert io.load_json(str(path)) == {"a": [1, 2], "b": 1}
