"""

Zero-shot evaluation of frozen ensembles on a target corpus and the block
count sweep with ensemble bootstrap intervals.

"""
import os
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from nbeats_forecasting import io, logging
from nbeats_forecasting.api.ensemble import EnsembleSpec, combine, member_forecasts, train_ensemble
from nbeats_forecasting.api.table import generate_table
from nbeats_forecasting.api.trainer import TrainConfig
from nbeats_forecasting.baselines import baseline_forecast
from nbeats_forecasting.data import Corpus, Frequency, map_frequency, split
from nbeats_forecasting.metrics import Metric, MetricConfig, evaluate, owa
from nbeats_forecasting.modules.nbeats import NBeatsModel

__all__ = [
    "EvalReport",
    "SweepRow",
    "SweepTable",
    "score_forecasts",
    "zero_shot_eval",
    "block_sweep"
]

REPORT_SCHEMA_VERSION = 1
MODEL = "nbeats"
BOOTSTRAP_RESAMPLES = 200
_MEAN_METRICS = (Metric.SMAPE, Metric.SMAPE_M3, Metric.MAPE, Metric.MASE)


def _resolve_metrics(metrics: Sequence[str], baselines: Sequence[str]) -> Tuple[List[Metric], List[str]]:
    metrics = [Metric.parse(m) for m in metrics]
    if len(metrics) == 0:
        raise ValueError("got no metrics to evaluate")
    baselines = list(dict.fromkeys(baselines))
    if Metric.OWA in metrics:
        # OWA is rebuilt from aggregate sMAPE and MASE of the forecaster and of Naive2
        for needed in [Metric.SMAPE, Metric.MASE]:
            if needed not in metrics:
                metrics.insert(metrics.index(Metric.OWA), needed)
        if "naive2" not in baselines:
            baselines.append("naive2")
    return list(dict.fromkeys(metrics)), baselines


def _column(forecaster: str, metric: str) -> str:
    return metric if forecaster == MODEL else f"{forecaster}_{metric}"


def score_forecasts(
    metrics: Sequence[Metric],
    targets: Sequence[np.ndarray],
    forecasts: Sequence[np.ndarray],
    insamples: Sequence[np.ndarray],
    m: int,
    naive2_forecasts: Optional[Sequence[np.ndarray]] = None
) -> Dict[str, float]:
    """

    Aggregate value of every metric for one forecaster on one split. ND
    additionally reports its summed absolute errors and targets so it can be
    re-aggregated across splits.

    """
    scores: Dict[str, float] = {}
    for metric in metrics:
        result = evaluate(MetricConfig(metric, m), targets, forecasts, insamples, naive2_forecasts)
        scores[metric.value] = result.aggregate
        if metric == Metric.ND:
            scores["nd_abs_error"] = float(sum(np.sum(np.abs(np.asarray(y) - f)) for y, f in zip(targets, forecasts)))
            scores["nd_abs_target"] = float(sum(np.sum(np.abs(y)) for y in targets))
    return scores


def _aggregate_rows(rows: List[Dict[str, Any]], metrics: Sequence[Metric], forecasters: Sequence[str]) -> Dict[str, Any]:
    counts = np.array([row["num_series"] for row in rows], dtype=np.float64)
    aggregate: Dict[str, Any] = {"split": "all", "source_split": "", "num_series": int(counts.sum()), "horizon": ""}
    for forecaster in forecasters:
        for metric in metrics:
            if metric in _MEAN_METRICS:
                col = _column(forecaster, metric.value)
                aggregate[col] = float(np.sum(counts * np.array([row[col] for row in rows])) / counts.sum())
            elif metric == Metric.ND:
                err = float(sum(row[_column(forecaster, "nd_abs_error")] for row in rows))
                target = float(sum(row[_column(forecaster, "nd_abs_target")] for row in rows))
                aggregate[_column(forecaster, "nd_abs_error")] = err
                aggregate[_column(forecaster, "nd_abs_target")] = target
                aggregate[_column(forecaster, "nd")] = err / target
    if Metric.OWA in metrics:
        for forecaster in forecasters:
            aggregate[_column(forecaster, "owa")] = owa(
                aggregate[_column(forecaster, "smape")],
                aggregate[_column(forecaster, "mase")],
                aggregate[_column("naive2", "smape")],
                aggregate[_column("naive2", "mase")]
            )
    return aggregate


@dataclass
class EvalReport:
    name: str
    # one row per target split
    rows: List[Dict[str, Any]]
    aggregate: Dict[str, Any]
    metrics: List[str]
    forecasters: List[str]
    member_count: int
    config_digest: Optional[str] = None
    seeds: List[int] = field(default_factory=list)
    model_digests: Dict[str, List[str]] = field(default_factory=dict)
    wall_clock: float = 0.0

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows + [self.aggregate])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "name": self.name,
            "metrics": self.metrics,
            "forecasters": self.forecasters,
            "member_count": self.member_count,
            "config_digest": self.config_digest,
            "seeds": self.seeds,
            "model_digests": self.model_digests,
            "rows": self.rows,
            "aggregate": self.aggregate
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "EvalReport":
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {d.get('schema_version')}")
        return cls(
            name=d["name"],
            rows=d["rows"],
            aggregate=d["aggregate"],
            metrics=d["metrics"],
            forecasters=d["forecasters"],
            member_count=d["member_count"],
            config_digest=d.get("config_digest"),
            seeds=d.get("seeds", []),
            model_digests=d.get("model_digests", {})
        )

    def write(self, out_dir: str, stem: str = "zeroshot") -> Tuple[str, str]:
        """

        Writes <stem>.csv with one row per split and an 'all' row, <stem>.json
        with the full provenance and <stem>.timing.json with the wall clock.
        The first two are byte-identical for identical runs.

        :return: paths of the CSV and the JSON file
        """
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        json_path = os.path.join(out_dir, f"{stem}.json")
        table = self.table()
        table.insert(0, "config_digest", self.config_digest or "")
        with io.atomic_write(csv_path) as of:
            table.to_csv(of, index=False, float_format="%.10g")
        io.write_json(json_path, self.to_dict())
        io.write_json(os.path.join(out_dir, f"{stem}.timing.json"), {"wall_clock_seconds": self.wall_clock})
        return csv_path, json_path

    def to_markdown(self) -> str:
        columns = ["split", "num_series"] + [
            _column(f, m) for f in self.forecasters for m in self.metrics
        ]
        return generate_table(
            headers=[columns],
            data=[[_format_cell(row.get(c, "")) for c in columns] for row in self.rows + [self.aggregate]],
            horizontal_lines=[0] * (len(self.rows) - 1) + [1, 0]
        )


def _format_cell(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def _digests(ensembles: Mapping[str, Sequence[NBeatsModel]]) -> Dict[str, List[str]]:
    return {split_name: [io.model_digest(m) for m in members] for split_name, members in ensembles.items()}


def zero_shot_eval(
    ensembles: Mapping[str, Sequence[NBeatsModel]],
    target: Corpus,
    metrics: Sequence[str] = ("smape", "mase", "owa"),
    baselines: Sequence[str] = ("naive2",),
    mode: str = "test",
    config_digest: Optional[str] = None,
    seeds: Optional[Sequence[int]] = None,
    source_splits: Optional[Mapping[str, str]] = None,
    workers: Optional[int] = 1
) -> EvalReport:
    """

    Forecasts every series of the target corpus, one series at a time from
    its own history, with the frozen ensemble of its split and scores the
    median forecast against the held-out horizon. Model parameters are
    never updated; their digests are compared before and after.

    :param ensembles: frozen members per target split name
    :param target: target corpus
    :param metrics: metrics to report
    :param baselines: statistical baselines scored alongside the ensemble
    :param mode: test or validation split of the target series
    :param config_digest: digest of the run config, embedded in the report
    :param seeds: member seeds, embedded in the report
    :param source_splits: name of the source split each target split was trained on
    :param workers: threads used to run members in parallel
    :return: evaluation report
    """
    logger = logging.get_logger("ZERO_SHOT")
    start = time.perf_counter()
    metric_list, baselines = _resolve_metrics(metrics, baselines)
    forecasters = [MODEL] + baselines
    before = _digests(ensembles)

    rows = []
    member_counts = set()
    for frequency in target.frequencies:
        split_name = frequency.value
        if split_name not in ensembles:
            raise ValueError(
                f"no ensemble for the {split_name} split of {target.name}, got ensembles for {sorted(ensembles)}"
            )
        members = ensembles[split_name]
        member_counts.add(len(members))
        split_corpus = target.by_frequency(frequency)
        history, held_out = split(split_corpus, mode)
        horizon = split_corpus.horizon()
        if any(m.horizon != horizon for m in members):
            raise ValueError(f"ensemble of split {split_name} does not forecast the split horizon {horizon}")
        m = frequency.seasonality
        histories = [ts.values for ts in history.series]
        targets = list(held_out)

        forecasts = {MODEL: list(combine(member_forecasts(members, histories, workers)))}
        for name in baselines:
            forecasts[name] = [baseline_forecast(name, h, horizon, m) for h in histories]
        naive2 = forecasts.get("naive2")

        row: Dict[str, Any] = {
            "split": split_name,
            "source_split": (source_splits or {}).get(split_name, split_name),
            "num_series": len(targets),
            "horizon": horizon
        }
        for forecaster in forecasters:
            scores = score_forecasts(metric_list, targets, forecasts[forecaster], histories, m, naive2)
            row.update({_column(forecaster, k): v for k, v in scores.items()})
        rows.append(row)
        logger.info(
            f"[{target.name}/{split_name}] {len(targets)} series, "
            + ", ".join(f"{metric.value} {row[metric.value]:.3f}" for metric in metric_list)
        )

    if _digests(ensembles) != before:
        raise RuntimeError("model parameters changed during zero-shot evaluation")

    aggregate = _aggregate_rows(rows, metric_list, forecasters)
    return EvalReport(
        name=target.name,
        rows=rows,
        aggregate=aggregate,
        metrics=[metric.value for metric in metric_list],
        forecasters=forecasters,
        member_count=max(member_counts),
        config_digest=config_digest,
        seeds=list(seeds or []),
        model_digests=before,
        wall_clock=time.perf_counter() - start
    )


@dataclass(frozen=True)
class SweepRow:
    block_count: int
    share_weights: bool
    metric: str
    # mean and standard deviation over ensemble bootstrap resamples
    mean: float
    std: float
    # metric of the full ensemble
    ensemble: float
    members: int


@dataclass
class SweepTable:
    rows: List[SweepRow]
    config_digest: Optional[str] = None
    seeds: List[int] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.rows])

    def write(self, path: str) -> str:
        frame = self.frame()
        frame.insert(0, "config_digest", self.config_digest or "")
        frame["seeds"] = ";".join(str(s) for s in self.seeds)
        with io.atomic_write(path) as of:
            frame.to_csv(of, index=False, float_format="%.10g")
        return path

    @classmethod
    def read(cls, path: str) -> "SweepTable":
        if not os.path.isfile(path):
            raise FileNotFoundError(f"sweep table {path} does not exist")
        frame = pd.read_csv(path, keep_default_na=False)
        missing = sorted({"block_count", "share_weights", "metric", "mean", "std", "ensemble", "members"} - set(frame.columns))
        if missing:
            raise ValueError(f"sweep table {path} misses columns {missing}")
        rows = [
            SweepRow(
                block_count=int(r["block_count"]),
                share_weights=str(r["share_weights"]).lower() == "true",
                metric=str(r["metric"]),
                mean=float(r["mean"]),
                std=float(r["std"]),
                ensemble=float(r["ensemble"]),
                members=int(r["members"])
            )
            for r in frame.to_dict("records")
        ]
        digest = str(frame["config_digest"].iloc[0]) if "config_digest" in frame.columns and len(frame) else None
        seeds = []
        if "seeds" in frame.columns and len(frame) and str(frame["seeds"].iloc[0]):
            seeds = [int(s) for s in str(frame["seeds"].iloc[0]).split(";")]
        return cls(rows, digest or None, seeds)

    def to_markdown(self) -> str:
        return generate_table(
            headers=[["L", "shared", "metric", "mean", "std", "ensemble", "members"]],
            data=[
                [str(r.block_count), "yes" if r.share_weights else "no", r.metric,
                 f"{r.mean:.3f}", f"{r.std:.3f}", f"{r.ensemble:.3f}", str(r.members)]
                for r in self.rows
            ]
        )


@dataclass
class _SplitData:
    targets: List[np.ndarray]
    histories: List[np.ndarray]
    naive2: Optional[List[np.ndarray]]
    m: int
    # [members x series x H]
    forecasts: np.ndarray


def _pooled_values(metric: Metric, parts: Sequence[_SplitData], member_idx: Optional[np.ndarray]) -> np.ndarray:
    # member_idx None scores the Naive2 forecasts instead of the ensemble
    values = []
    for part in parts:
        forecasts = part.naive2 if member_idx is None else list(combine(part.forecasts[member_idx]))
        values.append(evaluate(MetricConfig(metric, part.m), part.targets, forecasts, part.histories).values)
    return np.concatenate(values)


def _pooled_metric(metric: Metric, parts: Sequence[_SplitData], member_idx: np.ndarray) -> float:
    # all target series pooled, so mean metrics are weighted by series count
    if metric in _MEAN_METRICS:
        return float(np.mean(_pooled_values(metric, parts, member_idx)))
    elif metric == Metric.ND:
        err, total = 0.0, 0.0
        for part in parts:
            for y, f in zip(part.targets, combine(part.forecasts[member_idx])):
                err += float(np.sum(np.abs(y - f)))
                total += float(np.sum(np.abs(y)))
        return err / total
    elif metric == Metric.OWA:
        return owa(
            float(np.mean(_pooled_values(Metric.SMAPE, parts, member_idx))),
            float(np.mean(_pooled_values(Metric.MASE, parts, member_idx))),
            float(np.mean(_pooled_values(Metric.SMAPE, parts, None))),
            float(np.mean(_pooled_values(Metric.MASE, parts, None)))
        )
    raise ValueError(f"unknown metric {metric}")


def block_sweep(
    source: Corpus,
    target: Corpus,
    block_counts: Sequence[int],
    base: TrainConfig,
    spec: EnsembleSpec,
    share_weights: Sequence[bool] = (True,),
    metric: str = "smape",
    mode: str = "test",
    resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 0,
    workers: Optional[int] = None,
    target_dataset: Optional[str] = None,
    config_digest: Optional[str] = None
) -> SweepTable:
    """

    Trains an ensemble on the source corpus for every block count and
    sharing mode, evaluates it zero-shot on the target corpus and reports the
    metric of the full ensemble together with the mean and standard deviation
    over bootstrap resamples of the ensemble members.

    :param source: source corpus
    :param target: target corpus
    :param block_counts: values of L to sweep
    :param base: training config the member configs are derived from
    :param spec: ensemble grid
    :param share_weights: sharing modes to sweep
    :param metric: metric pooled over all target series
    :param mode: test or validation split of the target series
    :param resamples: number of bootstrap resamples
    :param seed: seed of the bootstrap
    :param workers: training threads
    :param target_dataset: target dataset name for the frequency mapping
    :param config_digest: digest of the run config, embedded in the table
    :return: sweep table with one row per (L, sharing)
    """
    logger = logging.get_logger("SWEEP")
    metric = Metric.parse(metric)
    if len(block_counts) == 0 or any(L < 1 for L in block_counts):
        raise ValueError(f"block counts must be at least 1, but got {list(block_counts)}")
    if resamples < 1:
        raise ValueError(f"need at least one bootstrap resample, but got {resamples}")

    splits = []
    for frequency in target.frequencies:
        split_corpus = target.by_frequency(frequency)
        history, held_out = split(split_corpus, mode)
        histories = [ts.values for ts in history.series]
        naive2 = None
        if metric == Metric.OWA:
            naive2 = [baseline_forecast("naive2", h, split_corpus.horizon(), frequency.seasonality) for h in histories]
        splits.append((frequency, split_corpus.horizon(), histories, list(held_out), naive2))

    rows = []
    for shared in share_weights:
        for block_count in block_counts:
            cfg = replace(base, block_count=int(block_count), share_weights=bool(shared))
            parts = []
            for frequency, horizon, histories, targets, naive2 in splits:
                source_split = map_frequency(source, frequency, target_dataset)
                results = train_ensemble(source_split, replace(cfg, horizon=horizon), spec, workers)
                forecasts = member_forecasts([r.model for r in results], histories)
                parts.append(_SplitData(targets, histories, naive2, Frequency.parse(frequency).seasonality, forecasts))

            num_members = spec.size
            rng = np.random.default_rng(seed)
            values = np.array([
                _pooled_metric(metric, parts, rng.integers(num_members, size=num_members))
                for _ in range(resamples)
            ])
            std = 0.0 if np.ptp(values) == 0 else float(np.std(values))
            row = SweepRow(
                block_count=int(block_count),
                share_weights=bool(shared),
                metric=metric.value,
                mean=float(np.mean(values)),
                std=std,
                ensemble=_pooled_metric(metric, parts, np.arange(num_members)),
                members=num_members
            )
            rows.append(row)
            logger.info(
                f"[L={block_count}, shared={shared}] {metric.value} {row.ensemble:.3f} "
                f"(bootstrap {row.mean:.3f} +- {row.std:.3f})"
            )
    seeds = [c.seed for c in spec.member_configs(base)]
    return SweepTable(rows, config_digest, seeds)
