import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aposteriori.data_io import (
    DataValidationError, FormatError, PeriodMatrix, SchemaError, TimeSeriesSet, calendar_years,
    from_period_matrix, load_time_series, normalize_features, resample_years, to_period_matrix,
    write_time_series,
)
from aposteriori.synthetic import generate_time_series

from conftest import series


def _csv(tmp_path, hours=48, **edits):
    idx = pd.date_range("2001-01-01", periods=hours, freq="h")
    rng = np.random.default_rng(0)
    df = pd.DataFrame({"timestamp": idx.strftime("%Y-%m-%dT%H:%M:%S")})
    for r in (2, 4, 5):
        df[f"demand_r{r}"] = rng.uniform(100, 200, hours)
    for r in (2, 5, 6):
        df[f"wind_r{r}"] = rng.uniform(0, 1, hours)
    for key, fn in edits.items():
        fn(df)
    path = tmp_path / "ts.csv"
    df.to_csv(path, index=False)
    return path


def test_load_shape(tmp_path, six_bus):
    ts = load_time_series(_csv(tmp_path), six_bus)
    assert ts.length == 48
    assert len(ts.series_names) == 6
    assert ts.start == pd.Timestamp("2001-01-01")


def test_wind_above_one_reports_row(tmp_path, six_bus):
    def bad(df):
        df.loc[10, "wind_r5"] = 1.2
    with pytest.raises(DataValidationError) as err:
        load_time_series(_csv(tmp_path, bad=bad), six_bus)
    # header is line 1, so data row 10 sits on line 12
    assert err.value.row == 12
    assert "wind_r5" in str(err.value)


@pytest.mark.parametrize("value", [np.nan, -1.0])
def test_bad_demand(tmp_path, six_bus, value):
    def bad(df):
        df.loc[3, "demand_r4"] = value
    with pytest.raises(DataValidationError):
        load_time_series(_csv(tmp_path, bad=bad), six_bus)


def test_missing_column_named(tmp_path, six_bus):
    with pytest.raises(SchemaError, match="wind_r6"):
        load_time_series(_csv(tmp_path, drop=lambda df: df.drop(columns="wind_r6", inplace=True)), six_bus)


def test_gap_in_timestamps(tmp_path, six_bus):
    def gap(df):
        df.loc[20:, "timestamp"] = (
            pd.to_datetime(df.loc[20:, "timestamp"]) + pd.Timedelta(hours=1)
        ).dt.strftime("%Y-%m-%dT%H:%M:%S")
    with pytest.raises(FormatError):
        load_time_series(_csv(tmp_path, gap=gap), six_bus)


def test_partial_day_rejected(tmp_path, six_bus):
    with pytest.raises(FormatError):
        load_time_series(_csv(tmp_path, hours=30), six_bus)


def test_csv_round_trip(tmp_path, six_bus):
    ts = generate_time_series(six_bus, 2001, 1, seed=5).slice_days(0, 3)
    write_time_series(ts, tmp_path / "x.csv")
    back = load_time_series(tmp_path / "x.csv", six_bus)
    assert back.start == ts.start
    for r in ts.demand:
        np.testing.assert_array_equal(back.demand[r], ts.demand[r])
    for r in ts.wind_cf:
        np.testing.assert_array_equal(back.wind_cf[r], ts.wind_cf[r])


def test_three_years_without_leap_days(six_bus):
    ts = generate_time_series(six_bus, 2001, 3, seed=0)
    assert ts.length == 26280
    assert ts.n_days == 1095
    assert to_period_matrix(ts).features.shape == (1095, 144)


# -- resampling -----------------------------------------------------------


def _two_years():
    n = 365 * 24 * 2
    return series({2: np.arange(n, dtype=float)}, start="1980-01-01")


def test_resample_membership_and_determinism():
    ts = _two_years()
    # 1980 has 366 days, so 730 days cover 1980 fully and 1981 only in part
    years = calendar_years(ts)
    assert list(years) == [1980]
    a = resample_years(ts, 3, seed=7)
    b = resample_years(ts, 3, seed=7)
    assert a.years == b.years
    np.testing.assert_array_equal(a.demand[2], b.demand[2])
    assert set(a.years) <= set(years)
    assert a.length == sum(years[y][1] - years[y][0] for y in a.years)


def test_resample_single_year_verbatim():
    n = 365 * 24
    ts = series({2: np.linspace(0, 1, n)}, start="2001-01-01")
    out = resample_years(ts, 1, seed=123)
    assert out.years == (2001,)
    np.testing.assert_array_equal(out.demand[2], ts.demand[2])


def test_resample_rejects_short_series():
    ts = series({2: np.ones(24 * 30)})
    with pytest.raises(ValueError):
        resample_years(ts, 1, seed=0)


def test_resample_matches_uniform_sampler():
    # 38 synthetic "years" of one day each would not be calendar years, so build
    # real years cheaply with a single region of constant data
    n_years = 38
    start = pd.Timestamp("1980-01-01")
    hours = (pd.Timestamp(f"{1980 + n_years}-01-01") - start) // pd.Timedelta(hours=1)
    ts = series({2: np.zeros(hours)}, start="1980-01-01")
    available = sorted(calendar_years(ts))
    assert len(available) == n_years
    seqs = set()
    for seed in range(100):
        picks = resample_years(ts, 3, seed).years
        oracle = tuple(available[i] for i in np.random.default_rng(seed).integers(0, n_years, size=3))
        assert picks == oracle
        seqs.add(picks)
    assert len(seqs) > 90


# -- period matrix ----------------------------------------------------------


def test_period_matrix_layout():
    ts = series({4: np.arange(48.0), 2: 100 + np.arange(48.0)}, {5: np.full(48, 0.5)})
    pm = to_period_matrix(ts)
    assert pm.features.shape == (2, 72)
    assert pm.column_labels[0] == ("demand_r2", 1)
    assert pm.column_labels[24] == ("demand_r4", 1)
    assert pm.column_labels[48] == ("wind_r5", 1)
    assert pm.features[1, 24] == 24.0
    assert pm.features[0, 23] == 123.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2), st.data())
def test_period_matrix_round_trip(n_days, n_wind, data):
    h = n_days * 24
    dem = data.draw(arrays(float, h, elements=st.floats(0, 1e5)))
    wind = {r: data.draw(arrays(float, h, elements=st.floats(0, 1))) for r in range(10, 10 + n_wind)}
    ts = series({1: dem}, wind)
    back = from_period_matrix(to_period_matrix(ts))
    np.testing.assert_array_equal(back.demand[1], ts.demand[1])
    for r in wind:
        np.testing.assert_array_equal(back.wind_cf[r], ts.wind_cf[r])
    assert back.start == ts.start


def _pm(values_by_series):
    cols = []
    labels = []
    for name, v in values_by_series.items():
        cols.append(np.asarray(v, dtype=float).reshape(-1, 24))
        labels += [(name, h) for h in range(1, 25)]
    feats = np.hstack(cols)
    return PeriodMatrix(feats, tuple(labels), np.arange(feats.shape[0]))


def test_normalize_population_variance():
    # one series, three days whose every hour takes the value of the day
    pm = _pm({"demand_r1": np.repeat([1.0, 2.0, 3.0], 24)})
    z = normalize_features(pm).features
    np.testing.assert_allclose(z[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)


def test_normalize_constant_series_to_zero():
    pm = _pm({"demand_r1": np.full(72, 5.0), "wind_r1": np.linspace(0, 1, 72)})
    z = normalize_features(pm).features
    assert np.all(z[:, :24] == 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.data())
def test_normalize_moments_and_idempotence(n_days, n_series, data):
    vals = {
        f"s{k}": data.draw(arrays(float, n_days * 24, elements=st.floats(-1e4, 1e4)))
        for k in range(n_series)
    }
    pm = _pm(vals)
    z = normalize_features(pm)
    for k in range(n_series):
        block = z.features[:, 24 * k: 24 * (k + 1)]
        raw = pm.features[:, 24 * k: 24 * (k + 1)]
        if np.ptp(raw) == 0 or raw.std() < 1e-6 * max(1.0, np.abs(raw).max()):
            continue
        assert abs(block.mean()) <= 1e-9
        assert abs(block.var() - 1.0) <= 1e-9
    twice = normalize_features(z)
    np.testing.assert_allclose(twice.features, z.features, atol=1e-9)


@pytest.mark.parametrize("method", ["hour_of_day", "minmax"])
def test_alternative_normalizations(method):
    rng = np.random.default_rng(1)
    pm = _pm({"demand_r1": rng.normal(5, 2, 24 * 10)})
    z = normalize_features(pm, method).features
    if method == "minmax":
        assert z.min() == 0.0 and z.max() == 1.0
    else:
        np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-12)


def test_frozen_arrays():
    ts = series({1: np.ones(24)})
    with pytest.raises(ValueError):
        ts.demand[1][0] = 5.0


def test_unequal_lengths_rejected():
    with pytest.raises(DataValidationError):
        TimeSeriesSet(pd.Timestamp("2001-01-01"), {1: np.ones(24)}, {2: np.ones(48) * 0.5})
