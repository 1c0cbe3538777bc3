import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.tsa.stattools import acf

from nbeats_forecasting import data
from nbeats_forecasting.data import Corpus, Frequency, TimeSeries


def test_horizons_and_seasonalities():
    assert [f.horizon for f in Frequency] == [6, 8, 18, 13, 14, 48, 8]
    assert [f.seasonality for f in Frequency] == [1, 4, 12, 1, 1, 24, 1]


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries("short", "Yearly", np.arange(6.0))
    with pytest.raises(ValueError):
        TimeSeries("nan", "Yearly", np.array([1.0] * 6 + [np.nan]))
    with pytest.raises(ValueError):
        Corpus("dup", (TimeSeries("a", "Yearly", np.arange(7.0)), TimeSeries("a", "Yearly", np.arange(8.0))))
    with pytest.raises(ValueError):
        Corpus("empty", ())
    ts = TimeSeries("a", "yearly", np.arange(7.0))
    assert ts.frequency == Frequency.YEARLY and ts.horizon == 6
    with pytest.raises(ValueError):
        ts.values[0] = 1.0


def test_corpus_round_trip(tmp_path, tiny_corpus):
    manifest = data.write_corpus(tiny_corpus, str(tmp_path / "corpus"))
    loaded = data.load_corpus(manifest)
    assert loaded.name == tiny_corpus.name
    assert loaded.ids == tiny_corpus.ids
    for a, b in zip(loaded.series, tiny_corpus.series):
        assert np.array_equal(a.values, b.values)
        assert a.horizon == b.horizon
    assert not any(name.startswith(".staging") for name in os.listdir(tmp_path / "corpus"))


def test_load_corpus_reports_bad_rows(tmp_path):
    (tmp_path / "Yearly.csv").write_text("a,1,2,3,4,5,6,7\nb,1,2,x,4,5,6,7\n")
    (tmp_path / "manifest.json").write_text(
        '{"schema_version": 1, "name": "bad", "splits": [{"frequency": "Yearly", "file": "Yearly.csv"}]}'
    )
    with pytest.raises(ValueError, match="row 2"):
        data.load_corpus(str(tmp_path / "manifest.json"))
    with pytest.raises(FileNotFoundError):
        data.load_corpus(str(tmp_path / "missing.json"))


def test_convert_generic_and_m4(tmp_path):
    generic = tmp_path / "series.csv"
    generic.write_text("s1,1,2,3,4,5,6,7,8\ns2,2,3,4,5,6,7,8,9,10\n")
    corpus = data.convert("generic", str(generic), str(tmp_path / "generic"), frequency="Quarterly", horizon=2)
    assert corpus.ids == ["s1", "s2"] and corpus.horizon() == 2
    assert os.path.isfile(tmp_path / "generic" / "manifest.json")

    m4_dir = tmp_path / "m4"
    m4_dir.mkdir()
    yearly_train = "V1,V2,V3,V4,V5,V6,V7\nY1,1,2,3,4,5,6\nY2,5,4,3,,,\n"
    (m4_dir / "Yearly-train.csv").write_text(yearly_train)
    (m4_dir / "Yearly-test.csv").write_text("V1,V2,V3,V4,V5,V6,V7\nY1,7,8,9,10,11,12\nY2,2,1,1,1,1,1\n")
    corpus = data.convert("m4", str(m4_dir))
    assert corpus.name == "m4"
    assert [len(ts) for ts in corpus.series] == [12, 9]
    assert corpus.series[1].values[:3].tolist() == [5.0, 4.0, 3.0]

    with pytest.raises(ValueError):
        data.convert("generic", str(generic))
    with pytest.raises(ValueError):
        data.convert("m5", str(generic))


def test_failed_conversion_writes_nothing(tmp_path):
    generic = tmp_path / "series.csv"
    generic.write_text("s1,1,2,3,4,5,6,7,8\ns2,1,2\n")
    with pytest.raises(ValueError):
        data.convert("generic", str(generic), str(tmp_path / "out"), frequency="Yearly")
    assert not os.path.exists(tmp_path / "out")


def test_split_modes():
    corpus = Corpus("c", (TimeSeries("a", "Yearly", np.arange(30.0)),))
    history, held_out = data.split(corpus, "test")
    assert len(history.series[0]) == 24 and held_out[0].tolist() == [24.0, 25.0, 26.0, 27.0, 28.0, 29.0]
    history, held_out = data.split(corpus, "validation")
    assert history.series[0].values[-1] == 17.0 and held_out[0][0] == 18.0
    short = Corpus("s", (TimeSeries("b", "Yearly", np.arange(12.0)),))
    with pytest.raises(ValueError):
        data.split(short, "test")
    with pytest.raises(ValueError):
        data.split(corpus, "train")


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2 ** 16),
    lookback=st.integers(min_value=2, max_value=7),
    history_size=st.integers(min_value=1, max_value=10)
)
def test_sampled_windows_never_reach_the_test_region(seed, lookback, history_size):
    corpus = data.synth_corpus(data.SeriesFamily("s", horizon=4, period=4, length=(9, 40)), 8, seed=seed)
    rng = np.random.default_rng(seed)
    samples = data.sample_batch(corpus, lookback * 4, 4, 32, rng, history_size)
    by_id = {ts.id: ts for ts in corpus.series}
    for sample in samples:
        ts = by_id[sample.series_id]
        train = ts.values[:len(ts) - ts.horizon]
        assert len(sample.x) == lookback * 4 and len(sample.y) == 4
        # the target is a contiguous piece of the training region
        starts = [
            i for i in range(len(train) - 3)
            if np.array_equal(train[i:i + 4], sample.y)
        ]
        assert starts
        assert np.all(sample.x[sample.mask] == 0.0)
        valid = sample.x[~sample.mask]
        assert len(valid) >= 1
        assert any(np.array_equal(train[s - len(valid):s], valid) for s in starts if s >= len(valid))


def _ramp_corpus(lengths) -> Corpus:
    # values are position + 1, so a value tells where it was taken from
    return Corpus("ramps", tuple(
        TimeSeries(f"ramp-{i}", "Monthly", np.arange(1.0, length + 1), horizon=4) for i, length in enumerate(lengths)
    ))


def test_series_are_drawn_uniformly():
    corpus = _ramp_corpus([40] * 10)
    batch = data.stack_windows(data.sample_batch(corpus, 8, 4, 10_000, np.random.default_rng(7)))
    counts = np.array([batch.series_ids.count(ts.id) for ts in corpus.series])
    chi2 = np.sum(np.square(counts - 1000) / 1000)
    # 99.9% quantile of chi2 with 9 degrees of freedom
    assert chi2 < 27.88
    assert np.all(np.abs(counts - 1000) < 4 * np.sqrt(10_000 * 0.1 * 0.9))


def test_forecast_points_are_drawn_uniformly():
    # 60 training values, forecast points lie in [20, 56]
    corpus = _ramp_corpus([64])
    batch = data.stack_windows(data.sample_batch(corpus, 8, 4, 37_000, np.random.default_rng(8)))
    cuts = batch.y[:, 0].astype(int) - 1
    assert cuts.min() == 20 and cuts.max() == 56
    counts = np.bincount(cuts - 20, minlength=37)
    chi2 = np.sum(np.square(counts - 1000) / 1000)
    # 99.9% quantile of chi2 with 36 degrees of freedom
    assert chi2 < 68.0


def test_short_history_is_left_padded():
    # 9 training values and a single forecast point leave t - 3 values for the window
    corpus = _ramp_corpus([13])
    sample, = data.sample_batch(corpus, 8, 4, 1, np.random.default_rng(0), history_size=1)
    assert sample.x.tolist() == [0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    assert sample.mask.tolist() == [True] * 3 + [False] * 5
    assert sample.y.tolist() == [6.0, 7.0, 8.0, 9.0]


def test_many_sampled_windows_stay_in_the_training_region():
    corpus = _ramp_corpus([9, 13, 20, 37, 64])
    batch = data.stack_windows(data.sample_batch(corpus, 12, 4, 100_000, np.random.default_rng(9)))
    train_lengths = {ts.id: len(ts) - ts.horizon for ts in corpus.series}
    limits = np.array([train_lengths[i] for i in batch.series_ids], dtype=np.float64)
    assert np.all(batch.y[:, -1] <= limits)
    assert np.all(np.diff(batch.y, axis=1) == 1.0)
    # the window ends right before the target
    assert np.all(batch.x[:, -1] == batch.y[:, 0] - 1)
    assert np.all(batch.x[batch.mask] == 0.0)


def test_sampling_is_deterministic(tiny_corpus):
    a = data.stack_windows(data.sample_batch(tiny_corpus, 8, 4, 16, np.random.default_rng(3)))
    b = data.stack_windows(data.sample_batch(tiny_corpus, 8, 4, 16, np.random.default_rng(3)))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) and a.series_ids == b.series_ids
    assert len(a) == 16


def test_upsampling_keeps_original_points():
    values = np.array([1.0, 4.0, 2.0, 8.0])
    up = data.upsample_bilinear(values, 2)
    assert up.tolist() == [1.0, 2.5, 4.0, 3.0, 2.0, 5.0, 8.0]
    ts = data.upsample_bilinear(TimeSeries("m", "Monthly", np.arange(20.0)), 2)
    assert ts.horizon == 36 and len(ts) == 39
    with pytest.raises(ValueError):
        data.upsample_bilinear(values, 1)


def test_upsampling_examples():
    assert data.upsample_bilinear(np.array([0.0, 2.0]), 2).tolist() == [0.0, 1.0, 2.0]
    assert data.upsample_bilinear(np.array([1.0, 1.0, 1.0]), 2).tolist() == [1.0] * 5


@settings(max_examples=50, deadline=None)
@given(
    values=st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=2, max_size=30),
    factor=st.integers(min_value=2, max_value=4)
)
def test_subsampling_an_upsampled_series_gives_it_back(values, factor):
    values = np.array(values)
    up = data.upsample_bilinear(values, factor)
    assert len(up) == factor * (len(values) - 1) + 1
    assert np.array_equal(up[::factor], values)


@settings(max_examples=50, deadline=None)
@given(
    values=st.lists(st.integers(min_value=-1000, max_value=1000), min_size=2, max_size=30),
    factor=st.integers(min_value=2, max_value=4)
)
def test_upsampling_keeps_monotonicity(values, factor):
    up = data.upsample_bilinear(np.sort(np.array(values, dtype=np.float64)), factor)
    assert np.all(np.diff(up) >= 0)


def test_frequency_mapping():
    m4 = Corpus("m4", tuple(
        TimeSeries(f"{f.value}-{i}", f, np.arange(2.0 * f.horizon + 2))
        for f in [Frequency.YEARLY, Frequency.QUARTERLY, Frequency.MONTHLY, Frequency.HOURLY]
        for i in range(2)
    ))
    others = data.map_frequency(m4, "Others", "m3")
    assert {ts.frequency for ts in others.series} == {Frequency.QUARTERLY}
    with pytest.raises(ValueError, match="valid pairs"):
        data.map_frequency(m4, "Weekly", "m3")

    fred = Corpus("fred", tuple(TimeSeries(f"m-{i}", "Monthly", np.arange(40.0)) for i in range(2)))
    hourly = data.map_frequency(fred, "Hourly", "electricity")
    assert all(len(ts) == 79 for ts in hourly.series)
    # unknown sources map every split onto itself
    synthetic = data.synth_corpus(data.SYNTHETIC_SOURCE, 3)
    assert data.map_frequency(synthetic, "Monthly", "synthetic-target").ids == synthetic.ids


def test_synthetic_families_are_deterministic_and_scaled():
    a = data.synth_corpus(data.SYNTHETIC_SOURCE, 20)
    b = data.synth_corpus(data.SYNTHETIC_SOURCE, 20)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a.series, b.series))
    target = data.synth_corpus(data.SYNTHETIC_TARGET, 20)
    assert min(np.mean(ts.values) for ts in target.series) > max(np.mean(ts.values) for ts in a.series)
    assert all(np.all(ts.values > 0) for ts in a.series + target.series)
    assert data.screen_overlap(a, target) == []
    assert len(data.screen_overlap(a, a)) == 20


def test_synthetic_seasonality_shows_in_the_autocorrelation():
    family = data.SeriesFamily("seasonal", period=12, amplitude=(0.1, 0.3), trend=(0.0, 0.0), seed=11)
    rho = np.array([acf(ts.values, nlags=12, fft=False) for ts in data.synth_corpus(family, 100).series])
    assert np.mean(rho[:, 12]) > np.mean(rho[:, 11])


def test_synthetic_trend_is_relative_to_the_level():
    family = data.SeriesFamily(
        "ramps", amplitude=(0.0, 0.0), trend=(0.004, 0.004), noise=(0.0, 0.0), level=(50.0, 500.0), seed=2
    )
    for ts in data.synth_corpus(family, 5).series:
        level = ts.values[0]
        assert np.allclose(np.diff(ts.values), 0.004 * level, rtol=1e-9)
