import enum
import os
import re
import shutil
import tempfile
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from nbeats_forecasting import io, mask
from nbeats_forecasting.logging import get_logger

__all__ = [
    "Frequency",
    "TimeSeries",
    "Corpus",
    "WindowSample",
    "WindowBatch",
    "SeriesFamily",
    "SYNTHETIC_SOURCE",
    "SYNTHETIC_TARGET",
    "CORPUS_SCHEMA_VERSION",
    "load_corpus",
    "write_corpus",
    "convert",
    "split",
    "sample_batch",
    "stack_windows",
    "map_frequency",
    "valid_mappings",
    "upsample_bilinear",
    "synth_corpus",
    "screen_overlap"
]

CORPUS_SCHEMA_VERSION = 1
# training windows end within this many horizons from the end of the training region
HISTORY_SIZE = 10


class Frequency(str, enum.Enum):
    YEARLY = "Yearly"
    QUARTERLY = "Quarterly"
    MONTHLY = "Monthly"
    WEEKLY = "Weekly"
    DAILY = "Daily"
    HOURLY = "Hourly"
    OTHERS = "Others"

    @classmethod
    def parse(cls, name: Union[str, "Frequency"]) -> "Frequency":
        """

        >>> Frequency.parse("monthly")
        <Frequency.MONTHLY: 'Monthly'>

        """
        if isinstance(name, Frequency):
            return name
        for freq in cls:
            if freq.value.lower() == str(name).strip().lower():
                return freq
        raise ValueError(f"unknown frequency {name}, must be one of {[f.value for f in cls]}")

    @property
    def horizon(self) -> int:
        return _HORIZONS[self]

    @property
    def seasonality(self) -> int:
        return _SEASONALITIES[self]


_HORIZONS = {
    Frequency.YEARLY: 6,
    Frequency.QUARTERLY: 8,
    Frequency.MONTHLY: 18,
    Frequency.WEEKLY: 13,
    Frequency.DAILY: 14,
    Frequency.HOURLY: 48,
    Frequency.OTHERS: 8
}

_SEASONALITIES = {
    Frequency.YEARLY: 1,
    Frequency.QUARTERLY: 4,
    Frequency.MONTHLY: 12,
    Frequency.WEEKLY: 1,
    Frequency.DAILY: 1,
    Frequency.HOURLY: 24,
    Frequency.OTHERS: 1
}


@dataclass(frozen=True)
class TimeSeries:
    id: str
    frequency: Frequency
    values: np.ndarray
    horizon: Optional[int] = None

    def __post_init__(self):
        freq = Frequency.parse(self.frequency)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"series {self.id} must be one dimensional, but got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"series {self.id} contains NaN or infinite values")
        horizon = freq.horizon if self.horizon is None else int(self.horizon)
        if horizon < 1:
            raise ValueError(f"series {self.id} has invalid horizon {horizon}")
        if len(values) < horizon + 1:
            raise ValueError(f"series {self.id} has length {len(values)}, but needs at least {horizon + 1} values")
        values.flags.writeable = False
        object.__setattr__(self, "frequency", freq)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "horizon", horizon)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def seasonality(self) -> int:
        return self.frequency.seasonality


@dataclass(frozen=True)
class Corpus:
    name: str
    series: Tuple[TimeSeries, ...]

    def __post_init__(self):
        series = tuple(self.series)
        if len(series) == 0:
            raise ValueError(f"corpus {self.name} is empty")
        seen = set()
        for ts in series:
            if ts.id in seen:
                raise ValueError(f"corpus {self.name} contains series {ts.id} more than once")
            seen.add(ts.id)
        object.__setattr__(self, "series", series)

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self) -> Iterator[TimeSeries]:
        return iter(self.series)

    @property
    def ids(self) -> List[str]:
        return [ts.id for ts in self.series]

    @property
    def frequencies(self) -> List[Frequency]:
        return sorted({ts.frequency for ts in self.series}, key=lambda f: list(Frequency).index(f))

    def by_frequency(self, frequency: Union[str, Frequency]) -> "Corpus":
        frequency = Frequency.parse(frequency)
        series = tuple(ts for ts in self.series if ts.frequency == frequency)
        if len(series) == 0:
            raise ValueError(
                f"corpus {self.name} has no {frequency.value} split, "
                f"available splits are {[f.value for f in self.frequencies]}"
            )
        return Corpus(self.name, series)

    def horizon(self) -> int:
        horizons = {ts.horizon for ts in self.series}
        if len(horizons) != 1:
            raise ValueError(f"corpus {self.name} mixes horizons {sorted(horizons)}")
        return horizons.pop()


@dataclass(frozen=True)
class WindowSample:
    x: np.ndarray
    # True marks left padding
    mask: np.ndarray
    y: np.ndarray
    series_id: str


@dataclass(frozen=True)
class WindowBatch:
    x: np.ndarray
    mask: np.ndarray
    y: np.ndarray
    series_ids: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.x)


def _format_value(v: float) -> str:
    return f"{v:.17g}"


def _parse_row(line: str, path: str, row: int) -> Tuple[str, np.ndarray]:
    fields = line.split(",")
    if len(fields) < 2 or fields[0] == "":
        raise ValueError(f"{path}: row {row}: expected 'id,v1,v2,...' but got '{line[:64]}'")
    try:
        values = np.array([float(v) for v in fields[1:] if v != ""], dtype=np.float64)
    except ValueError as e:
        raise ValueError(f"{path}: row {row}: {e}") from e
    return fields[0], values


def load_corpus(manifest_path: str) -> Corpus:
    """

    Loads a corpus from a JSON manifest listing one CSV file per frequency split.
    Each CSV row is 'id,v1,v2,...'.

    :param manifest_path: path to the manifest
    :return: validated corpus
    """
    manifest = io.load_json(manifest_path)
    if manifest.get("schema_version", CORPUS_SCHEMA_VERSION) != CORPUS_SCHEMA_VERSION:
        raise ValueError(f"unsupported corpus schema version {manifest.get('schema_version')} in {manifest_path}")
    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    series = []
    for split_cfg in manifest["splits"]:
        frequency = Frequency.parse(split_cfg["frequency"])
        horizon = int(split_cfg.get("horizon", frequency.horizon))
        path = os.path.join(base_dir, split_cfg["file"])
        if not os.path.isfile(path):
            raise FileNotFoundError(f"corpus file {path} listed in {manifest_path} does not exist")
        for row, line in enumerate(io.load_text_file(path), start=1):
            if line == "":
                continue
            ts_id, values = _parse_row(line, path, row)
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{path}: row {row}: series {ts_id} contains NaN or infinite values")
            series.append(TimeSeries(ts_id, frequency, values, horizon))
    if len(series) == 0:
        raise ValueError(f"corpus {manifest_path} is empty")
    return Corpus(manifest.get("name", os.path.basename(base_dir)), tuple(series))


def write_corpus(corpus: Corpus, out_dir: str) -> str:
    """

    Writes a corpus as one CSV file per frequency split plus a manifest.json.
    Files are staged in a temporary directory and moved into out_dir at the end.

    :param corpus: corpus to write
    :param out_dir: output directory
    :return: path to the manifest
    """
    os.makedirs(out_dir, exist_ok=True)
    staging = tempfile.mkdtemp(dir=out_dir, prefix=".staging-")
    try:
        splits = []
        for freq in corpus.frequencies:
            part = [ts for ts in corpus.series if ts.frequency == freq]
            horizons = {ts.horizon for ts in part}
            if len(horizons) != 1:
                raise ValueError(f"{freq.value} split of corpus {corpus.name} mixes horizons {sorted(horizons)}")
            file_name = f"{freq.value}.csv"
            with open(os.path.join(staging, file_name), "w", encoding="utf8") as of:
                for ts in part:
                    of.write(",".join([ts.id] + [_format_value(v) for v in ts.values]) + "\n")
            splits.append({
                "frequency": freq.value,
                "horizon": horizons.pop(),
                "file": file_name,
                "num_series": len(part)
            })
        io.write_json(
            os.path.join(staging, "manifest.json"),
            {"schema_version": CORPUS_SCHEMA_VERSION, "name": corpus.name, "splits": splits}
        )
        for file_name in sorted(os.listdir(staging)):
            os.replace(os.path.join(staging, file_name), os.path.join(out_dir, file_name))
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return os.path.join(out_dir, "manifest.json")


def _frame_rows(
    frame: pd.DataFrame,
    path: str,
    id_column: str,
    value_columns: Sequence[str]
) -> Iterator[Tuple[str, np.ndarray]]:
    for row, (_, record) in enumerate(frame.iterrows(), start=2):
        try:
            values = pd.to_numeric(record[list(value_columns)], errors="raise").to_numpy(dtype=np.float64)
        except (ValueError, TypeError) as e:
            raise ValueError(f"{path}: row {row}: {e}") from e
        yield str(record[id_column]).strip(), values[~np.isnan(values)]


def _read_csv(path: str, **kwargs) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"input file {path} does not exist")
    try:
        frame = pd.read_csv(path, **kwargs)
    except pd.errors.EmptyDataError as e:
        raise ValueError(f"input file {path} is empty") from e
    except pd.errors.ParserError as e:
        raise ValueError(f"could not parse {path}: {e}") from e
    if len(frame) == 0:
        raise ValueError(f"input file {path} contains no series")
    return frame


def _convert_m4(in_path: str, frequencies: Sequence[Frequency]) -> List[TimeSeries]:
    series = []
    for freq in frequencies:
        train_path = os.path.join(in_path, f"{freq.value}-train.csv")
        test_path = os.path.join(in_path, f"{freq.value}-test.csv")
        if not os.path.isfile(train_path):
            continue
        train = dict(_frame_rows(*_frame_and_columns(train_path)))
        test = dict(_frame_rows(*_frame_and_columns(test_path)))
        for ts_id, values in train.items():
            if ts_id not in test:
                raise ValueError(f"series {ts_id} of {train_path} has no test values in {test_path}")
            series.append(TimeSeries(ts_id, freq, np.concatenate([values, test[ts_id]]), freq.horizon))
    return series


def _frame_and_columns(path: str) -> Tuple[pd.DataFrame, str, str, List[str]]:
    frame = _read_csv(path, header=0)
    id_column = frame.columns[0]
    return frame, path, id_column, list(frame.columns[1:])


_M3_SHEETS = {
    "year": Frequency.YEARLY,
    "quart": Frequency.QUARTERLY,
    "month": Frequency.MONTHLY,
    "other": Frequency.OTHERS
}


def _guess_frequency(path: str) -> Frequency:
    name = os.path.basename(path).lower()
    for key, freq in _M3_SHEETS.items():
        if key in name:
            return freq
    raise ValueError(f"cannot infer the frequency of {path}, pass it explicitly")


def _convert_m3(in_path: str, frequency: Optional[Frequency]) -> List[TimeSeries]:
    frame = _read_csv(in_path, header=0)
    frame.columns = [str(c).strip() for c in frame.columns]
    for column in ["Series", "NF"]:
        if column not in frame.columns:
            raise ValueError(f"{in_path} is not an M3 sheet, missing column {column}")
    freq = frequency or _guess_frequency(in_path)
    value_columns = [c for c in frame.columns if re.fullmatch(r"\d+", c)]
    series = []
    for row, (ts_id, values) in enumerate(_frame_rows(frame, in_path, "Series", value_columns), start=2):
        horizon = int(frame["NF"].iloc[row - 2])
        series.append(TimeSeries(ts_id, freq, values, horizon))
    return series


def _convert_tourism(in_path: str, frequencies: Sequence[Frequency]) -> List[TimeSeries]:
    series = []
    for freq in frequencies:
        train_path = os.path.join(in_path, f"{freq.value.lower()}_in.csv")
        test_path = os.path.join(in_path, f"{freq.value.lower()}_oos.csv")
        if not os.path.isfile(train_path):
            continue
        train = _read_csv(train_path, header=0)
        test = _read_csv(test_path, header=0)
        for column in train.columns:
            if column not in test.columns:
                raise ValueError(f"series {column} of {train_path} has no test values in {test_path}")
            parts = []
            for frame, path in [(train, train_path), (test, test_path)]:
                # first row is the series length, second row the start period
                try:
                    length = int(frame[column].iloc[0])
                    values = pd.to_numeric(frame[column].iloc[2:2 + length], errors="raise").to_numpy(np.float64)
                except (ValueError, TypeError) as e:
                    raise ValueError(f"{path}: column {column}: {e}") from e
                if len(values) != length:
                    raise ValueError(f"{path}: column {column}: expected {length} values, but got {len(values)}")
                parts.append(values)
            series.append(TimeSeries(str(column).strip(), freq, np.concatenate(parts), len(parts[1])))
    return series


def _convert_generic(in_path: str, frequency: Frequency, horizon: Optional[int]) -> List[TimeSeries]:
    if not os.path.isfile(in_path):
        raise FileNotFoundError(f"input file {in_path} does not exist")
    series = []
    for row, line in enumerate(io.load_text_file(in_path), start=1):
        if line == "":
            continue
        ts_id, values = _parse_row(line, in_path, row)
        series.append(TimeSeries(ts_id, frequency, values, horizon))
    return series


def convert(
    layout: str,
    in_path: str,
    out_dir: Optional[str] = None,
    frequency: Optional[Union[str, Frequency]] = None,
    name: Optional[str] = None,
    horizon: Optional[int] = None
) -> Corpus:
    """

    Converts a public dataset layout into a corpus and, if out_dir is given,
    writes it. Nothing is written if any row fails to parse.

    Layouts:
        - m4: directory with <Frequency>-train.csv and <Frequency>-test.csv
        - m3: one CSV export of an M3 sheet (Series, N, NF, Category, ..., 1, 2, ...)
        - tourism: directory with <frequency>_in.csv and <frequency>_oos.csv
        - generic: one CSV file with rows 'id,v1,v2,...'

    :param layout: one of m4, m3, tourism, generic
    :param in_path: input file or directory
    :param out_dir: output directory for the corpus files
    :param frequency: restricts m4/tourism to one split, required for generic
    :param name: corpus name, defaults to the layout name
    :param horizon: horizon override for the generic layout
    :return: converted corpus
    """
    logger = get_logger("CONVERT")
    freq = None if frequency is None else Frequency.parse(frequency)
    if layout == "m4":
        series = _convert_m4(in_path, [freq] if freq else list(Frequency))
    elif layout == "m3":
        series = _convert_m3(in_path, freq)
    elif layout == "tourism":
        series = _convert_tourism(
            in_path,
            [freq] if freq else [Frequency.YEARLY, Frequency.QUARTERLY, Frequency.MONTHLY]
        )
    elif layout == "generic":
        if freq is None:
            raise ValueError("the generic layout needs an explicit frequency")
        series = _convert_generic(in_path, freq, horizon)
    else:
        raise ValueError(f"unknown layout {layout}, must be one of m4, m3, tourism, generic")
    if len(series) == 0:
        raise ValueError(f"found no series in {in_path} for layout {layout}")

    corpus = Corpus(name or layout, tuple(series))
    logger.info(f"converted {len(corpus):,} series from {in_path} ({', '.join(f.value for f in corpus.frequencies)})")
    if out_dir is not None:
        write_corpus(corpus, out_dir)
    return corpus


def split(corpus: Corpus, mode: str = "test") -> Tuple[Corpus, Tuple[np.ndarray, ...]]:
    """

    Splits every series into history and held-out part. The test part is the
    last horizon, the validation part the penultimate one (the test part is
    dropped from the history).

    >>> c = Corpus("c", (TimeSeries("a", "Yearly", np.arange(30.0)),))
    >>> history, held_out = split(c, "validation")
    >>> len(history.series[0]), held_out[0].tolist()
    (18, [18.0, 19.0, 20.0, 21.0, 22.0, 23.0])

    :param corpus: corpus to split
    :param mode: test or validation
    :return: history corpus and held-out values aligned with the series order
    """
    if mode == "test":
        offset = 1
    elif mode == "validation":
        offset = 2
    else:
        raise ValueError(f"unknown split mode {mode}, must be test or validation")
    history = []
    held_out = []
    for ts in corpus.series:
        h = ts.horizon
        end = len(ts) - (offset - 1) * h
        cut = end - h
        if cut < h + 1:
            raise ValueError(
                f"series {ts.id} of length {len(ts)} is too short for a {mode} split with horizon {h}"
            )
        history.append(replace(ts, values=ts.values[:cut]))
        held = ts.values[cut:end].copy()
        held.flags.writeable = False
        held_out.append(held)
    return Corpus(corpus.name, tuple(history)), tuple(held_out)


def sample_batch(
    corpus: Corpus,
    t: int,
    horizon: int,
    batch_size: int,
    rng: np.random.Generator,
    history_size: int = HISTORY_SIZE
) -> List[WindowSample]:
    """

    Samples training windows. Series are drawn uniformly, then the forecast
    point is drawn uniformly among the last history_size * horizon points of
    the training region, which is everything before the series' own test
    horizon. Targets never reach into the test region. Windows of series
    shorter than t are left padded with zeros.

    :param corpus: corpus to sample from
    :param t: input window size
    :param horizon: target window size
    :param batch_size: number of samples
    :param rng: random generator
    :param history_size: forecast points are drawn from this many horizons
    :return: list of window samples
    """
    if batch_size < 1:
        raise ValueError(f"batch size must be at least 1, but got {batch_size}")
    train_parts = []
    for ts in corpus.series:
        train = ts.values[:len(ts) - ts.horizon]
        if len(train) >= horizon + 1:
            train_parts.append((ts.id, train))
    if len(train_parts) == 0:
        raise ValueError(
            f"no series of corpus {corpus.name} has at least {horizon + 1} training values for horizon {horizon}"
        )
    series_indices = rng.integers(len(train_parts), size=batch_size)
    samples = []
    for idx in series_indices:
        ts_id, train = train_parts[idx]
        n = len(train)
        low = max(1, n - history_size * horizon)
        cut = int(rng.integers(low, n - horizon + 1))
        window = train[max(0, cut - t):cut]
        pad = t - len(window)
        x = np.concatenate([np.zeros(pad), window])
        samples.append(WindowSample(
            x=x,
            mask=mask.left_padding_mask([len(window)], t)[0],
            y=train[cut:cut + horizon].copy(),
            series_id=ts_id
        ))
    return samples


def stack_windows(samples: Sequence[WindowSample]) -> WindowBatch:
    if len(samples) == 0:
        raise ValueError("cannot stack an empty list of windows")
    return WindowBatch(
        x=np.stack([s.x for s in samples]),
        mask=np.stack([s.mask for s in samples]),
        y=np.stack([s.y for s in samples]),
        series_ids=[s.series_id for s in samples]
    )


def upsample_bilinear(series: Union[np.ndarray, TimeSeries], factor: int = 2) -> Union[np.ndarray, TimeSeries]:
    """

    Inserts factor - 1 linearly interpolated points between neighbours.
    A TimeSeries keeps its id and frequency and gets its horizon scaled.

    >>> upsample_bilinear(np.array([0.0, 2.0])).tolist()
    [0.0, 1.0, 2.0]

    """
    if not isinstance(factor, (int, np.integer)) or factor < 2:
        raise ValueError(f"upsampling factor must be an integer >= 2, but got {factor}")
    if isinstance(series, TimeSeries):
        return TimeSeries(
            series.id, series.frequency, upsample_bilinear(series.values, factor), series.horizon * factor
        )
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1 or len(values) < 2:
        raise ValueError(f"need a series of at least 2 values to upsample, but got shape {values.shape}")
    n = len(values)
    positions = np.arange(factor * (n - 1) + 1) / factor
    out = np.interp(positions, np.arange(n), values)
    # keep the original points bit-exact
    out[::factor] = values
    return out


_F = Frequency
# target dataset -> source dataset -> target split -> (source split, upsampling factor)
_MAPPINGS: Dict[str, Dict[str, Dict[Frequency, Tuple[Frequency, int]]]] = {
    "fred": {
        "m4": {f: (f, 1) for f in [_F.YEARLY, _F.QUARTERLY, _F.MONTHLY, _F.WEEKLY, _F.DAILY]}
    },
    "m4": {
        "fred": {
            _F.YEARLY: (_F.YEARLY, 1),
            _F.QUARTERLY: (_F.QUARTERLY, 1),
            _F.MONTHLY: (_F.MONTHLY, 1),
            _F.WEEKLY: (_F.MONTHLY, 1),
            _F.DAILY: (_F.MONTHLY, 1),
            _F.HOURLY: (_F.MONTHLY, 2)
        }
    },
    "m3": {
        source: {
            _F.YEARLY: (_F.YEARLY, 1),
            _F.QUARTERLY: (_F.QUARTERLY, 1),
            _F.MONTHLY: (_F.MONTHLY, 1),
            _F.OTHERS: (_F.QUARTERLY, 1)
        }
        for source in ["m4", "fred"]
    },
    "tourism": {
        source: {f: (f, 1) for f in [_F.YEARLY, _F.QUARTERLY, _F.MONTHLY]}
        for source in ["m4", "fred"]
    },
    "electricity": {"m4": {_F.HOURLY: (_F.HOURLY, 1)}, "fred": {_F.HOURLY: (_F.MONTHLY, 2)}},
    "traffic": {"m4": {_F.HOURLY: (_F.HOURLY, 1)}, "fred": {_F.HOURLY: (_F.MONTHLY, 2)}}
}


def _dataset_kind(name: str) -> str:
    return re.split(r"[^a-z0-9]", name.lower(), maxsplit=1)[0]


def valid_mappings(source_dataset: str, target_dataset: Optional[str] = None) -> Dict[Frequency, Tuple[Frequency, int]]:
    """

    Target split -> (source split, upsampling factor) for a source dataset,
    restricted to one target dataset if given. Without a target dataset all
    rows known for the source are merged.

    >>> valid_mappings("m4", "m3")[Frequency.OTHERS]
    (<Frequency.QUARTERLY: 'Quarterly'>, 1)

    """
    source = _dataset_kind(source_dataset)
    if target_dataset is not None:
        target = _dataset_kind(target_dataset)
        return dict(_MAPPINGS.get(target, {}).get(source, {}))
    merged: Dict[Frequency, Tuple[Frequency, int]] = {}
    for rows in _MAPPINGS.values():
        for target_freq, mapped in rows.get(source, {}).items():
            merged.setdefault(target_freq, mapped)
    return merged


def map_frequency(
    source: Corpus,
    target_frequency: Union[str, Frequency],
    target_dataset: Optional[str] = None
) -> Corpus:
    """

    Returns the source split a model for the target split is trained on.
    Sources other than M4 and FRED map every split to the split of the same
    frequency.

    :param source: source corpus, its name identifies the source dataset
    :param target_frequency: split of the target dataset to forecast
    :param target_dataset: name of the target dataset, e.g. m3 or electricity
    :return: (possibly upsampled) source split
    """
    target_frequency = Frequency.parse(target_frequency)
    if _dataset_kind(source.name) in {"m4", "fred"}:
        mappings = valid_mappings(source.name, target_dataset)
    else:
        mappings = {f: (f, 1) for f in source.frequencies}
    if target_frequency not in mappings:
        pairs = ", ".join(
            f"{target.value} <- {src.value}" + (f" x{factor}" if factor > 1 else "")
            for target, (src, factor) in mappings.items()
        )
        raise ValueError(
            f"no mapping from {source.name} to the {target_frequency.value} split"
            f"{'' if target_dataset is None else ' of ' + target_dataset}, valid pairs are: {pairs or 'none'}"
        )
    source_frequency, factor = mappings[target_frequency]
    mapped = source.by_frequency(source_frequency)
    if factor > 1:
        mapped = Corpus(
            f"{source.name}/{source_frequency.value}x{factor}",
            tuple(upsample_bilinear(ts, factor) for ts in mapped.series)
        )
    return mapped


@dataclass(frozen=True)
class SeriesFamily:
    """

    Parameter ranges of a synthetic series family. Series are

        level * (1 + amplitude * sin(2 pi k / period + phase)) + trend * level * k + level * noise * z_k

    with z_k standard normal clipped to [-3, 3].

    """
    name: str
    frequency: Frequency = Frequency.MONTHLY
    horizon: int = 12
    period: int = 12
    length: Tuple[int, int] = (48, 144)
    level: Tuple[float, float] = (50.0, 150.0)
    amplitude: Tuple[float, float] = (0.0, 0.3)
    trend: Tuple[float, float] = (-0.002, 0.01)
    noise: Tuple[float, float] = (0.0, 0.05)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "frequency", Frequency.parse(self.frequency))
        for attr in ["length", "level", "amplitude", "trend", "noise"]:
            low, high = getattr(self, attr)
            if low > high:
                raise ValueError(f"range {attr} of family {self.name} is empty: ({low}, {high})")
        if self.length[0] < self.horizon + 1:
            raise ValueError(f"family {self.name} produces series shorter than horizon + 1")
        if self.level[0] <= 0 or self.amplitude[0] < 0 or self.noise[0] < 0 or self.period < 1:
            raise ValueError(f"family {self.name} needs positive levels, non-negative amplitudes and noise")
        margin = 1 - self.amplitude[1] - 3 * self.noise[1] + min(0.0, self.trend[0]) * self.length[1]
        if margin <= 0:
            raise ValueError(f"parameter ranges of family {self.name} can produce non-positive values")


SYNTHETIC_SOURCE = SeriesFamily(name="synthetic-source", seed=0)
SYNTHETIC_TARGET = SeriesFamily(
    name="synthetic-target",
    length=(48, 120),
    level=(500.0, 1500.0),
    seed=1
)


def synth_corpus(family: SeriesFamily, n_series: int, seed: Optional[int] = None) -> Corpus:
    """

    Draws n_series series from a family, deterministically per seed.

    >>> flat = SeriesFamily("flat", amplitude=(0.0, 0.0), trend=(0.0, 0.0), noise=(0.0, 0.0))
    >>> values = synth_corpus(flat, 1, seed=0).series[0].values
    >>> bool(np.all(values == values[0]))
    True

    """
    if n_series < 1:
        raise ValueError(f"need at least one series, but got {n_series}")
    rng = np.random.default_rng(family.seed if seed is None else seed)
    series = []
    for i in range(n_series):
        length = int(rng.integers(family.length[0], family.length[1] + 1))
        level = rng.uniform(*family.level)
        amplitude = rng.uniform(*family.amplitude)
        phase = rng.uniform(0, 2 * np.pi)
        trend = rng.uniform(*family.trend)
        noise = rng.uniform(*family.noise)
        k = np.arange(length)
        z = np.clip(rng.standard_normal(length), -3, 3)
        values = (
            level * (1 + amplitude * np.sin(2 * np.pi * k / family.period + phase))
            + trend * level * k
            + level * noise * z
        )
        series.append(TimeSeries(f"{family.name}-{i}", family.frequency, values, family.horizon))
    return Corpus(family.name, tuple(series))


def screen_overlap(source: Corpus, target: Corpus, horizon: Optional[int] = None) -> List[Tuple[str, str]]:
    """

    Finds target series whose last 2 * horizon values exactly equal the last
    2 * horizon values of a source series. Report only, nothing is dropped.

    :param source: source corpus
    :param target: target corpus
    :param horizon: horizon used for the comparison, defaults to each target series' horizon
    :return: (target id, source id) pairs
    """
    index: Dict[Tuple[int, bytes], str] = {}
    lengths = {2 * (horizon or ts.horizon) for ts in target.series}
    for ts in source.series:
        for size in lengths:
            if len(ts) >= size:
                index.setdefault((size, ts.values[-size:].tobytes()), ts.id)
    overlaps = []
    for ts in target.series:
        size = 2 * (horizon or ts.horizon)
        if len(ts) < size:
            continue
        match = index.get((size, ts.values[-size:].tobytes()))
        if match is not None:
            overlaps.append((ts.id, match))
    return overlaps
