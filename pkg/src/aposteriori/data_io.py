"""Hourly demand/wind time series: CSV ingestion, year resampling, daily
period vectors and feature normalisation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .config import ConfigError, SystemConfig

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24
NORMALIZATIONS = ("series", "hour_of_day", "minmax")


class DataError(ValueError):
    """Base class for time series input problems."""


class SchemaError(DataError):
    """A required column is missing."""


class DataValidationError(DataError):
    """A value is out of range; ``row`` is the 1-based line number in the file."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class FormatError(DataError):
    """Timestamps are not a contiguous hourly sequence of whole days."""


def demand_column(region: int) -> str:
    return f"demand_r{region}"


def wind_column(region: int) -> str:
    return f"wind_r{region}"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeriesSet:
    """Hourly demand (MW) and wind capacity factors keyed by region id.

    ``years`` lists the calendar year behind each block when the set was
    built by :func:`resample_years`; the blocks are laid end to end from
    ``start`` regardless of their true dates.
    """

    start: pd.Timestamp
    demand: dict[int, np.ndarray]
    wind_cf: dict[int, np.ndarray]
    years: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "start", pd.Timestamp(self.start))
        demand = {int(r): _frozen(v) for r, v in sorted(self.demand.items())}
        wind = {int(r): _frozen(v) for r, v in sorted(self.wind_cf.items())}
        lengths = {len(v) for v in demand.values()} | {len(v) for v in wind.values()}
        if len(lengths) > 1:
            raise DataValidationError(f"series lengths differ: {sorted(lengths)}")
        length = lengths.pop() if lengths else 0
        if length % HOURS_PER_DAY:
            raise FormatError(f"length {length} is not a multiple of {HOURS_PER_DAY}")
        for r, v in demand.items():
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise DataValidationError(f"demand in region {r} must be finite and nonnegative")
        for r, v in wind.items():
            if not np.all(np.isfinite(v)) or np.any((v < 0) | (v > 1)):
                raise DataValidationError(f"wind capacity factor in region {r} must lie in [0, 1]")
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "wind_cf", wind)
        object.__setattr__(self, "_length", length)

    @property
    def length(self) -> int:
        return self._length

    @property
    def n_days(self) -> int:
        return self._length // HOURS_PER_DAY

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=self.length, freq="h")

    @property
    def series_names(self) -> list[str]:
        return [demand_column(r) for r in self.demand] + [wind_column(r) for r in self.wind_cf]

    def total_demand(self) -> float:
        return float(sum(v.sum() for v in self.demand.values()))

    def demand_matrix(self, regions, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Demand rows for ``regions`` (zeros where absent), hours [start, stop)."""
        stop = self.length if stop is None else stop
        out = np.zeros((len(regions), stop - start))
        for k, r in enumerate(regions):
            if r in self.demand:
                out[k] = self.demand[r][start:stop]
        return out

    def cf_matrix(self, regions, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.length if stop is None else stop
        return np.array([self.wind_cf[r][start:stop] for r in regions]).reshape(len(regions), stop - start)

    def slice_days(self, first: int, stop: int) -> "TimeSeriesSet":
        a, b = first * HOURS_PER_DAY, stop * HOURS_PER_DAY
        return TimeSeriesSet(
            start=self.start + pd.Timedelta(hours=a),
            demand={r: v[a:b] for r, v in self.demand.items()},
            wind_cf={r: v[a:b] for r, v in self.wind_cf.items()},
        )

    def check_against(self, config: SystemConfig) -> None:
        """Raise ConfigError unless this set supplies every series ``config`` needs."""
        known = set(config.regions)
        extra = (set(self.demand) | set(self.wind_cf)) - known
        if extra:
            raise ConfigError(f"time series reference regions absent from config: {sorted(extra)}")
        missing = [demand_column(r) for r in config.demand_regions if r not in self.demand]
        missing += [wind_column(r) for r in config.wind_regions if r not in self.wind_cf]
        if missing:
            raise ConfigError(f"time series missing for {missing}")


# -- CSV ----------------------------------------------------------------------


def load_time_series(path: str | Path, config: SystemConfig) -> TimeSeriesSet:
    """Read ``timestamp,demand_r<id>...,wind_r<id>...`` hourly CSV data.

    Only the columns ``config`` needs are kept. The first timestamp must be
    midnight and timestamps must advance in exact one-hour steps.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"time series file not found: {path}")
    frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    needed = [demand_column(r) for r in config.demand_regions] + [wind_column(r) for r in config.wind_regions]
    for col in ["timestamp", *needed]:
        if col not in frame.columns:
            raise SchemaError(f"missing column {col!r} in {path}")

    try:
        stamps = pd.to_datetime(frame["timestamp"], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise FormatError(f"unparseable timestamp: {exc}") from exc
    if len(stamps) == 0:
        raise FormatError("no rows")
    steps = np.diff(stamps.to_numpy()).astype("timedelta64[s]").astype(np.int64)
    bad = np.flatnonzero(steps != 3600)
    if bad.size:
        raise FormatError(f"row {bad[0] + 3}: timestamps are not contiguous hourly steps")
    if stamps.iloc[0] != stamps.iloc[0].normalize():
        raise FormatError("first timestamp must fall on midnight")
    if len(frame) % HOURS_PER_DAY:
        raise FormatError(f"{len(frame)} rows is not a whole number of days")

    for col in needed:
        values = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
        if col.startswith("demand_"):
            bad = np.flatnonzero(~np.isfinite(values) | (values < 0))
            what = "demand must be a nonnegative number"
        else:
            bad = np.flatnonzero(~np.isfinite(values) | (values < 0) | (values > 1))
            what = "wind capacity factor must lie in [0, 1]"
        if bad.size:
            # +2: header line and 1-based numbering
            raise DataValidationError(f"{col}={frame[col].iloc[bad[0]]!r}: {what}", row=int(bad[0]) + 2)
        frame[col] = values

    start = stamps.iloc[0]
    if start.tzinfo is not None:
        start = start.tz_convert("UTC").tz_localize(None)
    return TimeSeriesSet(
        start=start,
        demand={r: frame[demand_column(r)].to_numpy() for r in config.demand_regions},
        wind_cf={r: frame[wind_column(r)].to_numpy() for r in config.wind_regions},
    )


def write_time_series(ts: TimeSeriesSet, path: str | Path) -> None:
    frame = pd.DataFrame({"timestamp": ts.timestamps.strftime("%Y-%m-%dT%H:%M:%S")})
    for r, v in ts.demand.items():
        frame[demand_column(r)] = v
    for r, v in ts.wind_cf.items():
        frame[wind_column(r)] = v
    frame.to_csv(path, index=False, float_format="%.17g")


# -- resampling ---------------------------------------------------------------


def calendar_years(ts: TimeSeriesSet) -> dict[int, tuple[int, int]]:
    """Complete calendar years in ``ts`` mapped to their [start, stop) hour range."""
    stamps = ts.timestamps
    out = {}
    for year in sorted(set(stamps.year)):
        first = pd.Timestamp(year=year, month=1, day=1)
        hours = (pd.Timestamp(year=year + 1, month=1, day=1) - first) // pd.Timedelta(hours=1)
        a = (first - ts.start) // pd.Timedelta(hours=1)
        if a >= 0 and a + hours <= ts.length:
            out[year] = (int(a), int(a + hours))
    return out


def resample_years(ts: TimeSeriesSet, n_years: int, seed: int) -> TimeSeriesSet:
    """Concatenate ``n_years`` calendar years drawn uniformly with replacement."""
    if n_years < 1:
        raise DataError("n_years must be at least 1")
    blocks = calendar_years(ts)
    if not blocks:
        raise DataError("time series does not span a complete calendar year")
    available = sorted(blocks)
    rng = np.random.default_rng(seed)
    picks = [available[i] for i in rng.integers(0, len(available), size=n_years)]
    logger.debug("resampled years %s", picks)

    def cat(series):
        return {r: np.concatenate([v[slice(*blocks[y])] for y in picks]) for r, v in series.items()}

    return TimeSeriesSet(
        start=pd.Timestamp(year=picks[0], month=1, day=1),
        demand=cat(ts.demand),
        wind_cf=cat(ts.wind_cf),
        years=tuple(picks),
    )


# -- daily period vectors -----------------------------------------------------


@dataclass(frozen=True)
class PeriodMatrix:
    """One row per day; columns are (series, hour-of-day) pairs, hours 1..24."""

    features: np.ndarray
    column_labels: tuple[tuple[str, int], ...]
    day_index: np.ndarray
    start: pd.Timestamp | None = None
    scaling: dict = field(default_factory=dict, compare=False)

    @property
    def n_periods(self) -> int:
        return self.features.shape[0]

    @property
    def series_names(self) -> list[str]:
        return list(dict.fromkeys(name for name, _ in self.column_labels))

    def columns_of(self, series: str) -> np.ndarray:
        return np.array([k for k, (name, _) in enumerate(self.column_labels) if name == series])

    def series_block(self, series: str) -> np.ndarray:
        """Days x 24 block of one series."""
        return self.features[:, self.columns_of(series)]


def daily_vectors(hourly: np.ndarray) -> np.ndarray:
    """Reshape (n_series, hours) into (days, n_series * 24), series-major per row."""
    hourly = np.atleast_2d(np.asarray(hourly, dtype=float))
    n_series, hours = hourly.shape
    if hours % HOURS_PER_DAY:
        raise FormatError(f"{hours} hours is not a whole number of days")
    days = hours // HOURS_PER_DAY
    return hourly.reshape(n_series, days, HOURS_PER_DAY).transpose(1, 0, 2).reshape(days, -1)


def to_period_matrix(ts: TimeSeriesSet) -> PeriodMatrix:
    names = ts.series_names
    hourly = [ts.demand[r] for r in ts.demand] + [ts.wind_cf[r] for r in ts.wind_cf]
    feats = daily_vectors(np.array(hourly).reshape(len(names), ts.length))
    labels = tuple((name, h) for name in names for h in range(1, HOURS_PER_DAY + 1))
    return PeriodMatrix(features=feats, column_labels=labels, day_index=np.arange(ts.n_days), start=ts.start)


def from_period_matrix(pm: PeriodMatrix) -> TimeSeriesSet:
    """Inverse of :func:`to_period_matrix`."""
    demand, wind = {}, {}
    for name in pm.series_names:
        block = pm.series_block(name).reshape(-1)
        kind, _, region = name.partition("_r")
        (demand if kind == "demand" else wind)[int(region)] = block
    start = pm.start if pm.start is not None else pd.Timestamp("2000-01-01")
    return TimeSeriesSet(start=start, demand=demand, wind_cf=wind)


def _series_groups(pm: PeriodMatrix) -> list[np.ndarray]:
    return [pm.columns_of(name) for name in pm.series_names]


def normalize_features(pm: PeriodMatrix, method: str = "series") -> PeriodMatrix:
    """Shift and scale features prior to clustering.

    ``series`` pools all hours of all days per series to mean 0 and
    population variance 1; ``hour_of_day`` does the same per column;
    ``minmax`` maps each series onto [0, 1]. Constant groups become zeros.
    """
    if method not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {method!r}; expected one of {NORMALIZATIONS}")
    x = np.array(pm.features, dtype=float)
    out = np.zeros_like(x)
    groups = _series_groups(pm) if method != "hour_of_day" else [np.array([k]) for k in range(x.shape[1])]
    for cols in groups:
        block = x[:, cols]
        if method == "minmax":
            lo, hi = block.min(), block.max()
            if hi > lo:
                out[:, cols] = (block - lo) / (hi - lo)
        else:
            mu, sd = block.mean(), block.std()
            # exact range test: rounding gives constant blocks a tiny nonzero std
            if np.ptp(block) > 0 and sd > 0:
                out[:, cols] = (block - mu) / sd
    return PeriodMatrix(
        features=out, column_labels=pm.column_labels, day_index=pm.day_index,
        start=pm.start, scaling={"method": method},
    )
