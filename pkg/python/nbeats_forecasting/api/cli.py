import argparse
import os
import sys
import time
from dataclasses import replace
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from nbeats_forecasting import configuration, data, diagnostics, io, logging
from nbeats_forecasting.api.ensemble import EnsembleSpec, train_ensemble
from nbeats_forecasting.api.evaluation import EvalReport, SweepTable, block_sweep, zero_shot_eval
from nbeats_forecasting.api.table import generate_table
from nbeats_forecasting.api.trainer import TrainConfig
from nbeats_forecasting.version import __version__

ENSEMBLE_SCHEMA_VERSION = 1
FAMILIES = {
    "source": (data.SYNTHETIC_SOURCE, 1000),
    "target": (data.SYNTHETIC_TARGET, 200)
}


def train_config(cfg: configuration.RunConfig) -> TrainConfig:
    return TrainConfig(
        iterations=cfg.iterations,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        loss=cfg.losses[0],
        lookback=cfg.lookbacks[0],
        seed=cfg.seed,
        block_count=cfg.block_count,
        layers=cfg.layers,
        width=cfg.width,
        share_weights=cfg.share_weights,
        history_size=cfg.history_size,
        log_interval=cfg.log_interval
    )


def ensemble_spec(cfg: configuration.RunConfig) -> EnsembleSpec:
    return EnsembleSpec(lookbacks=cfg.lookbacks, losses=cfg.losses, repeats=cfg.repeats)


def _training_splits(
    cfg: configuration.RunConfig,
    source: data.Corpus,
    target: Optional[data.Corpus]
) -> List[Tuple[str, data.Corpus, int]]:
    # (split name, training corpus, horizon); without a target every source split is trained in-domain
    if target is None:
        return [(f.value, source.by_frequency(f), source.by_frequency(f).horizon()) for f in source.frequencies]
    target_dataset = cfg.target_dataset or target.name
    return [
        (f.value, data.map_frequency(source, f, target_dataset), target.by_frequency(f).horizon())
        for f in target.frequencies
    ]


class ForecastingCli:
    @classmethod
    def parser(
        cls,
        name: str = "nbf",
        description: str = "Train N-BEATS ensembles and evaluate them zero-shot on other datasets"
    ) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument(
            "--log-level",
            type=str,
            choices=["none", "info", "debug"],
            default="info",
            help="Sets the logging level for the underlying loggers"
        )
        run = argparse.ArgumentParser(add_help=False)
        run.add_argument(
            "-c",
            "--config",
            type=str,
            default=None,
            help="Path to a YAML or JSON run config, values not given there come from the profile"
        )
        run.add_argument("--profile", choices=sorted(configuration.PROFILES), default=None, help="Default profile")
        run.add_argument("--source", type=str, default=None, help="Path to the source corpus manifest")
        run.add_argument("--target", type=str, default=None, help="Path to the target corpus manifest")
        run.add_argument(
            "--target-dataset",
            type=str,
            default=None,
            help="Name of the target dataset used to pick the frequency mapping, e.g. m3 or tourism"
        )
        run.add_argument("--seed", type=int, default=None, help="Base seed of the ensemble members")
        run.add_argument("--iterations", type=int, default=None, help="Training iterations per member")
        run.add_argument(
            "--workers",
            type=int,
            default=None,
            help=f"Number of members trained in parallel (default: ${configuration.WORKERS_ENV_VAR} or core count)"
        )

        parser = argparse.ArgumentParser(name, description=description)
        parser.add_argument("-v", "--version", action="version", version=f"{name} {__version__}")
        commands = parser.add_subparsers(dest="command", required=True)

        convert = commands.add_parser("convert", parents=[common], help="Convert a public dataset layout")
        convert.add_argument("--layout", choices=["m4", "m3", "tourism", "generic"], required=True)
        convert.add_argument("-i", "--input", type=str, required=True, help="Input file or directory")
        convert.add_argument("-o", "--output", type=str, required=True, help="Output corpus directory")
        convert.add_argument("--frequency", type=str, default=None, help="Restrict to or set the frequency split")
        convert.add_argument("--name", type=str, default=None, help="Corpus name")
        convert.add_argument("--horizon", type=int, default=None, help="Horizon for the generic layout")

        synth = commands.add_parser("synth", parents=[common], help="Write a synthetic corpus")
        synth.add_argument("--family", choices=sorted(FAMILIES), required=True)
        synth.add_argument("-o", "--output", type=str, required=True, help="Output corpus directory")
        synth.add_argument("-n", "--num-series", type=int, default=None)
        synth.add_argument("--seed", type=int, default=None)

        train = commands.add_parser("train", parents=[common, run], help="Train ensembles, one per target split")
        train.add_argument("-o", "--output", type=str, required=True, help="Output run directory")

        zeroshot = commands.add_parser("zeroshot", parents=[common], help="Evaluate trained ensembles zero-shot")
        zeroshot.add_argument("--checkpoints", type=str, required=True, help="Checkpoint directory of a train run")
        zeroshot.add_argument("--target", type=str, required=True, help="Path to the target corpus manifest")
        zeroshot.add_argument("-o", "--output", type=str, required=True, help="Output directory for the report")
        zeroshot.add_argument("--workers", type=int, default=None, help="Threads running members in parallel")

        sweep = commands.add_parser("sweep", parents=[common, run], help="Sweep the number of blocks")
        sweep.add_argument("-o", "--output", type=str, required=True, help="Output directory for the sweep table")

        diagnose = commands.add_parser("diagnose", parents=[common], help="Run numerical diagnostics on a checkpoint")
        diagnose.add_argument("--checkpoint", type=str, required=True)
        diagnose.add_argument("-o", "--output", type=str, default=None, help="Output JSON path")
        diagnose.add_argument("-c", "--config", type=str, default=None, help="Run config with the diagnostic settings")
        diagnose.add_argument("--probes", type=int, default=None, help="Number of random probe windows")
        diagnose.add_argument("--seed", type=int, default=None, help="Seed of the probe windows")

        report = commands.add_parser("report", parents=[common], help="Collect reports and sweeps into tables")
        report.add_argument("--artifacts", type=str, required=True, help="Directory searched for reports and sweeps")
        report.add_argument("-o", "--output", type=str, required=True, help="Output directory for the tables")
        return parser

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.logger = logging.get_logger("CLI")

    def _run_config(self) -> configuration.RunConfig:
        overrides = {
            "profile": self.args.profile,
            "source": self.args.source,
            "target": self.args.target,
            "target_dataset": self.args.target_dataset,
            "seed": self.args.seed,
            "iterations": self.args.iterations,
            "workers": self.args.workers,
            "output_dir": self.args.output
        }
        return configuration.load_run_config(self.args.config, overrides)

    def run(self) -> None:
        command = getattr(self, f"cmd_{self.args.command}")
        start = time.perf_counter()
        command()
        self.logger.info(f"{self.args.command} took {time.perf_counter() - start:.2f}s")

    def cmd_convert(self) -> None:
        data.convert(
            self.args.layout,
            self.args.input,
            self.args.output,
            frequency=self.args.frequency,
            name=self.args.name,
            horizon=self.args.horizon
        )

    def cmd_synth(self) -> None:
        family, num_series = FAMILIES[self.args.family]
        corpus = data.synth_corpus(family, self.args.num_series or num_series, self.args.seed)
        path = data.write_corpus(corpus, self.args.output)
        self.logger.info(f"wrote {len(corpus):,} {family.name} series to {path}")

    def cmd_train(self) -> None:
        cfg = self._run_config()
        if cfg.source is None:
            raise ValueError("training needs a source corpus, set source in the config or pass --source")
        digest = configuration.config_digest(cfg)
        source = data.load_corpus(cfg.source)
        target = data.load_corpus(cfg.target) if cfg.target is not None else None
        if target is not None:
            overlaps = data.screen_overlap(source, target)
            if overlaps:
                self.logger.warning(
                    f"{len(overlaps)} target series end exactly like a source series, e.g. "
                    f"{overlaps[0][0]} and {overlaps[0][1]}"
                )
        base = train_config(cfg)
        spec = ensemble_spec(cfg)
        ckpt_dir = os.path.join(cfg.output_dir, "checkpoints")
        start = time.perf_counter()

        splits: Dict[str, Any] = {}
        for split_name, corpus, horizon in _training_splits(cfg, source, target):
            self.logger.info(f"training the {split_name} ensemble on {corpus.name} with horizon {horizon}")
            results = train_ensemble(corpus, replace(base, horizon=horizon), spec, cfg.workers)
            members = []
            curves = {}
            for i, result in enumerate(results):
                file_name = os.path.join(split_name, f"member_{i}.nbf")
                meta = {**result.meta, "config_digest": digest, "member": i}
                member_digest = io.save_checkpoint(os.path.join(ckpt_dir, file_name), result.model, meta)
                members.append({
                    "file": file_name,
                    "seed": result.config.seed,
                    "lookback": result.config.lookback,
                    "loss": result.config.loss.value,
                    "digest": member_digest,
                    "final_loss": float(result.losses[-1])
                })
                curves[f"member_{i}"] = result.losses
            with io.atomic_write(os.path.join(ckpt_dir, split_name, "losses.csv")) as of:
                pd.DataFrame(curves).to_csv(of, index_label="iteration", float_format="%.10g")
            splits[split_name] = {"horizon": horizon, "source_split": corpus.name, "members": members}

        io.write_json(os.path.join(ckpt_dir, "ensemble.json"), {
            "schema_version": ENSEMBLE_SCHEMA_VERSION,
            "config_digest": digest,
            "config": {k: v for k, v in cfg.to_dict().items() if k != "workers"},
            "splits": splits
        })
        io.write_json(os.path.join(ckpt_dir, "ensemble.timing.json"), {"wall_clock_seconds": time.perf_counter() - start})
        self.logger.info(f"wrote {sum(len(s['members']) for s in splits.values())} checkpoints to {ckpt_dir}")

    def cmd_zeroshot(self) -> None:
        manifest_path = os.path.join(self.args.checkpoints, "ensemble.json")
        manifest = io.load_json(manifest_path)
        if manifest.get("schema_version") != ENSEMBLE_SCHEMA_VERSION:
            raise ValueError(f"unsupported ensemble schema version {manifest.get('schema_version')} in {manifest_path}")
        cfg = configuration.run_config(manifest["config"], {"workers": self.args.workers})

        ensembles = {}
        seeds = []
        for split_name, split_info in manifest["splits"].items():
            members = []
            for member in split_info["members"]:
                model, _ = io.load_checkpoint(os.path.join(self.args.checkpoints, member["file"]))
                if io.model_digest(model) != member["digest"]:
                    raise ValueError(f"checkpoint {member['file']} does not match its digest in {manifest_path}")
                members.append(model)
                seeds.append(member["seed"])
            ensembles[split_name] = members

        target = data.load_corpus(self.args.target)
        report = zero_shot_eval(
            ensembles,
            target,
            metrics=cfg.metrics,
            baselines=cfg.baselines,
            mode=cfg.mode,
            config_digest=manifest["config_digest"],
            seeds=sorted(set(seeds)),
            source_splits={name: info["source_split"] for name, info in manifest["splits"].items()},
            workers=cfg.workers
        )
        csv_path, _ = report.write(self.args.output, "zeroshot")
        self.logger.info(f"wrote zero-shot report to {csv_path}")
        print(report.to_markdown())

    def cmd_sweep(self) -> None:
        cfg = self._run_config()
        if cfg.source is None or cfg.target is None:
            raise ValueError("a block sweep needs a source and a target corpus")
        source = data.load_corpus(cfg.source)
        target = data.load_corpus(cfg.target)
        start = time.perf_counter()
        table = block_sweep(
            source,
            target,
            cfg.sweep_block_counts,
            train_config(cfg),
            ensemble_spec(cfg),
            share_weights=cfg.sweep_share_weights,
            metric=cfg.sweep_metric,
            mode=cfg.mode,
            resamples=cfg.bootstrap_resamples,
            seed=cfg.seed,
            workers=cfg.workers,
            target_dataset=cfg.target_dataset or target.name,
            config_digest=configuration.config_digest(cfg)
        )
        path = table.write(os.path.join(cfg.output_dir, "sweep.csv"))
        io.write_json(os.path.join(cfg.output_dir, "sweep.timing.json"), {"wall_clock_seconds": time.perf_counter() - start})
        self.logger.info(f"wrote sweep table to {path}")
        print(table.to_markdown())

    def cmd_diagnose(self) -> None:
        cfg = configuration.load_run_config(
            self.args.config,
            {"diagnostic_probes": self.args.probes, "seed": self.args.seed}
        )
        model, meta = io.load_checkpoint(self.args.checkpoint)
        report = diagnostics.run_diagnostics(
            model,
            seed=cfg.seed,
            probes=cfg.diagnostic_probes,
            scales=cfg.diagnostic_scales
        )
        report["model_digest"] = io.model_digest(model)
        report["config_digest"] = meta.get("config_digest")
        report["seeds"] = [model.seed]
        output = self.args.output or os.path.splitext(self.args.checkpoint)[0] + ".diagnostics.json"
        io.write_json(output, report)
        self.logger.info(f"wrote diagnostics to {output}")

    def cmd_report(self) -> None:
        reports, sweeps = [], []
        for root, _, files in sorted(os.walk(self.args.artifacts)):
            for file in sorted(files):
                path = os.path.join(root, file)
                if file.endswith(".json") and not file.endswith(".timing.json"):
                    d = io.load_json(path)
                    if isinstance(d, dict) and "forecasters" in d and "rows" in d:
                        reports.append(EvalReport.from_dict(d))
                elif file.startswith("sweep") and file.endswith(".csv"):
                    sweeps.append(SweepTable.read(path))
        if not reports and not sweeps:
            raise FileNotFoundError(f"found no zero-shot reports or sweep tables in {self.args.artifacts}")

        os.makedirs(self.args.output, exist_ok=True)
        if reports:
            rows = []
            for report in reports:
                for row in report.rows + [report.aggregate]:
                    rows.append({
                        "dataset": report.name,
                        "config_digest": report.config_digest or "",
                        "seeds": ";".join(str(s) for s in report.seeds),
                        **row
                    })
            with io.atomic_write(os.path.join(self.args.output, "table1.csv")) as of:
                pd.DataFrame(rows).to_csv(of, index=False, float_format="%.10g")
            for report in reports:
                print(f"{report.name}\n{report.to_markdown()}\n")
        if sweeps:
            rows = [
                {
                    "x": row.block_count,
                    "y": row.mean,
                    "std": row.std,
                    "ensemble": row.ensemble,
                    "share_weights": row.share_weights,
                    "metric": row.metric,
                    "config_digest": sweep.config_digest or "",
                    "seeds": ";".join(str(s) for s in sweep.seeds)
                }
                for sweep in sweeps for row in sweep.rows
            ]
            with io.atomic_write(os.path.join(self.args.output, "blocks.csv")) as of:
                pd.DataFrame(rows).to_csv(of, index=False, float_format="%.10g")
            print(generate_table(
                headers=[["L", "shared", "metric", "mean", "std"]],
                data=[
                    [str(r["x"]), "yes" if r["share_weights"] else "no", r["metric"], f"{r['y']:.3f}", f"{r['std']:.3f}"]
                    for r in rows
                ]
            ))


def main(argv: Optional[List[str]] = None) -> int:
    args = ForecastingCli.parser().parse_args(argv)
    logging.setup_logging(logging.log_level(args.log_level))
    logger = logging.get_logger("CLI")
    try:
        ForecastingCli(args).run()
    except Exception as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        logger.debug("traceback", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
