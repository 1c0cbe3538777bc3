import os

import pytest

from nbeats_forecasting import configuration


def test_profiles():
    full = configuration.run_config({"profile": "full"})
    assert (full.block_count, full.layers, full.width, full.iterations) == (30, 4, 512, 15000)
    assert configuration.ensemble_size(full) == 90
    desk = configuration.run_config()
    assert desk.profile == "desk" and configuration.ensemble_size(desk) == 18


def test_overrides_win_over_file_values():
    cfg = configuration.run_config({"profile": "desk", "seed": 3, "width": 64}, {"seed": 7, "width": None})
    assert cfg.seed == 7 and cfg.width == 64


def test_unknown_keys_and_values_are_rejected():
    with pytest.raises(ValueError, match="unknown config keys"):
        configuration.run_config({"blocks": 4})
    with pytest.raises(ValueError):
        configuration.run_config({"profile": "huge"})
    with pytest.raises(ValueError):
        configuration.run_config({"mode": "train"})
    with pytest.raises(ValueError):
        configuration.run_config({"schema_version": 2})


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv(configuration.WORKERS_ENV_VAR, "3")
    assert configuration.run_config().workers == 3
    assert configuration.run_config(overrides={"workers": 5}).workers == 5


def test_digest_ignores_workers_only():
    base = configuration.run_config({"workers": 1})
    assert configuration.config_digest(base) == configuration.config_digest(configuration.run_config({"workers": 8}))
    assert configuration.config_digest(base) != configuration.config_digest(configuration.run_config({"seed": 1}))


def test_load_run_config_resolves_operators(tmp_path, monkeypatch):
    monkeypatch.setenv("NBF_TEST_ITERATIONS", "25")
    (tmp_path / "baselines.yaml").write_text("- naive\n- naive2\n")
    (tmp_path / "run.yaml").write_text(
        "profile: desk\n"
        "iterations: env(NBF_TEST_ITERATIONS)\n"
        "baselines: file(baselines.yaml)\n"
        "repeats: eval(2 + 1)\n"
    )
    cfg = configuration.load_run_config(str(tmp_path / "run.yaml"), {"seed": 4})
    assert cfg.iterations == 25 and cfg.repeats == 3 and cfg.seed == 4
    assert cfg.baselines == ("naive", "naive2")
    with pytest.raises(FileNotFoundError):
        configuration.load_run_config(str(tmp_path / "missing.yaml"))


def test_shipped_configs_load(monkeypatch):
    monkeypatch.setenv("NBF_SOURCE", "m4/manifest.json")
    monkeypatch.setenv("NBF_TARGET", "m3/manifest.json")
    desk = configuration.load_run_config("resources/configs/desk.yaml")
    full = configuration.load_run_config("resources/configs/full.yaml")
    assert desk.sweep_share_weights == (True, False)
    assert full.target_dataset == "m3" and full.source == "m4/manifest.json"
    assert "theta" in full.baselines


def test_config_operators_nest(tmp_path, monkeypatch):
    monkeypatch.setenv("NBF_TEST_FACTOR", "4")
    monkeypatch.delenv("NBF_TEST_MISSING", raising=False)
    (tmp_path / "nested.yaml").write_text(
        "width: eval(env(NBF_TEST_FACTOR) * 32)\n"
        "seed: env(NBF_TEST_MISSING:7)\n"
        "output_dir: abspath(runs)\n"
    )
    cfg = configuration.load_config(str(tmp_path / "nested.yaml"))
    assert cfg["width"] == 128 and cfg["seed"] == 7
    assert os.path.isabs(cfg["output_dir"])
    (tmp_path / "bad.yaml").write_text("seed: env(NBF_TEST_MISSING)\n")
    with pytest.raises(ValueError):
        configuration.load_config(str(tmp_path / "bad.yaml"))
