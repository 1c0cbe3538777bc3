import os

import pandas as pd
import pytest
import yaml

from nbeats_forecasting import io
from nbeats_forecasting.api.cli import ForecastingCli, main


@pytest.fixture
def run_dir(tmp_path):
    config = {
        "profile": "desk",
        "block_count": 2,
        "layers": 2,
        "width": 16,
        "iterations": 5,
        "batch_size": 16,
        "log_interval": 5,
        "lookbacks": [2],
        "losses": ["smape"],
        "repeats": 2,
        "sweep_block_counts": [1, 2],
        "bootstrap_resamples": 5
    }
    with open(tmp_path / "config.yaml", "w", encoding="utf8") as of:
        yaml.safe_dump(config, of)
    for family, n in [("source", 12), ("target", 6)]:
        assert main(["synth", "--family", family, "-n", str(n), "-o", str(tmp_path / family), "--log-level", "none"]) == 0
    return tmp_path


def _run_args(run_dir):
    return [
        "-c", str(run_dir / "config.yaml"),
        "--source", str(run_dir / "source" / "manifest.json"),
        "--target", str(run_dir / "target" / "manifest.json"),
        "--workers", "1",
        "--log-level", "none"
    ]


def test_parser():
    parser = ForecastingCli.parser()
    args = parser.parse_args(["diagnose", "--checkpoint", "model.nbf"])
    assert args.command == "diagnose" and args.probes is None and args.log_level == "info"
    with pytest.raises(SystemExit):
        parser.parse_args(["train"])
    with pytest.raises(SystemExit):
        parser.parse_args(["synth", "--family", "other", "-o", "out"])


def test_train_zeroshot_diagnose_report(run_dir):
    out = run_dir / "run"
    assert main(["train", "-o", str(out)] + _run_args(run_dir)) == 0
    ckpt_dir = out / "checkpoints"
    manifest = io.load_json(str(ckpt_dir / "ensemble.json"))
    members = manifest["splits"]["Monthly"]["members"]
    assert [m["seed"] for m in members] == [0, 1]
    assert manifest["splits"]["Monthly"]["horizon"] == 12
    assert "workers" not in manifest["config"]
    assert len(pd.read_csv(ckpt_dir / "Monthly" / "losses.csv")) == 5

    assert main([
        "zeroshot",
        "--checkpoints", str(ckpt_dir),
        "--target", str(run_dir / "target" / "manifest.json"),
        "-o", str(out / "eval"),
        "--log-level", "none"
    ]) == 0
    report = io.load_json(str(out / "eval" / "zeroshot.json"))
    assert report["model_digests"] == {"Monthly": [m["digest"] for m in members]}
    assert report["config_digest"] == manifest["config_digest"]
    assert report["aggregate"]["num_series"] == 6

    ckpt = ckpt_dir / "Monthly" / "member_0.nbf"
    assert main(["diagnose", "--checkpoint", str(ckpt), "--probes", "3", "--log-level", "none"]) == 0
    diagnostics = io.load_json(str(ckpt_dir / "Monthly" / "member_0.diagnostics.json"))
    assert diagnostics["model_digest"] == members[0]["digest"]
    assert diagnostics["config_digest"] == manifest["config_digest"]

    assert main(["sweep", "-o", str(out / "sweep")] + _run_args(run_dir)) == 0
    assert os.path.isfile(out / "sweep" / "sweep.csv")

    assert main(["report", "--artifacts", str(out), "-o", str(out / "tables"), "--log-level", "none"]) == 0
    table = pd.read_csv(out / "tables" / "table1.csv", keep_default_na=False)
    assert table["split"].tolist() == ["Monthly", "all"]
    blocks = pd.read_csv(out / "tables" / "blocks.csv")
    assert blocks["x"].tolist() == [1, 2]


def test_zeroshot_rejects_modified_checkpoints(run_dir):
    out = run_dir / "run"
    assert main(["train", "-o", str(out)] + _run_args(run_dir)) == 0
    manifest_path = str(out / "checkpoints" / "ensemble.json")
    manifest = io.load_json(manifest_path)
    manifest["splits"]["Monthly"]["members"][1]["digest"] = "0" * 64
    io.write_json(manifest_path, manifest)
    assert main([
        "zeroshot",
        "--checkpoints", str(out / "checkpoints"),
        "--target", str(run_dir / "target" / "manifest.json"),
        "-o", str(out / "eval"),
        "--log-level", "none"
    ]) == 1
    assert not os.path.exists(out / "eval" / "zeroshot.csv")


def test_failures_return_exit_code_one(tmp_path):
    assert main(["report", "--artifacts", str(tmp_path), "-o", str(tmp_path / "tables"), "--log-level", "none"]) == 1
    assert main(["train", "-o", str(tmp_path / "run"), "--log-level", "none"]) == 1
    assert main([
        "diagnose", "--checkpoint", str(tmp_path / "missing.nbf"), "--log-level", "none"
    ]) == 1
