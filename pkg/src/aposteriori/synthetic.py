"""Synthetic hourly demand and wind data with engineered scarcity events.

Demand follows seasonal, weekly and diurnal cycles plus AR(1) noise. Wind
capacity factors come from a daily weather state shared across regions
(with regional idiosyncrasies) pushed through a logistic link. Each year
receives a few multi-day scarcity events: wind collapses everywhere while
demand rises, the situation that drives firm and storage capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import SystemConfig
from .data_io import HOURS_PER_DAY, TimeSeriesSet


@dataclass(frozen=True)
class SyntheticParams:
    mean_demand: float = 40000.0  # MW per demand region
    seasonal_amplitude: float = 0.15
    diurnal_amplitude: float = 0.12
    weekend_dip: float = 0.08
    noise: float = 0.03
    wind_mean_logit: float = -0.9
    wind_weather_sd: float = 1.0
    wind_persistence: float = 0.75  # daily AR(1) coefficient of the shared weather state
    events_per_year: int = 3
    event_days: tuple[int, int] = (3, 6)
    event_wind_factor: float = 0.08
    event_demand_uplift: float = 0.18


def _ar1(rng, n, phi, sd):
    out = np.empty(n)
    out[0] = rng.normal(0.0, sd)
    innov = rng.normal(0.0, sd * np.sqrt(1 - phi**2), size=n)
    for k in range(1, n):
        out[k] = phi * out[k - 1] + innov[k]
    return out


def _year(config: SystemConfig, year: int, n_days: int, rng, params: SyntheticParams, start: pd.Timestamp):
    hours = n_days * HOURS_PER_DAY
    doy = np.arange(hours) / HOURS_PER_DAY
    hod = np.arange(hours) % HOURS_PER_DAY
    weekday = ((start.dayofweek + np.arange(hours) // HOURS_PER_DAY) % 7)
    winter = np.cos(2 * np.pi * doy / 365.0)  # +1 early January

    events = np.zeros(n_days, dtype=bool)
    for _ in range(params.events_per_year):
        length = int(rng.integers(params.event_days[0], params.event_days[1] + 1))
        # bias onsets towards winter
        first = int(rng.choice(np.r_[np.arange(0, 60), np.arange(300, n_days - length)]))
        events[first:first + length] = True
    event_hours = np.repeat(events, HOURS_PER_DAY)

    diurnal = (
        -np.cos(2 * np.pi * (hod - 2) / 24) * 0.6 + np.exp(-((hod - 18) ** 2) / 6.0) * 0.8
    )
    demand = {}
    for k, r in enumerate(config.demand_regions):
        scale = params.mean_demand * (1.0 + 0.25 * ((k % 3) - 1))
        level = (
            1.0
            + params.seasonal_amplitude * winter
            + params.diurnal_amplitude * diurnal
            - params.weekend_dip * (weekday >= 5)
            + _ar1(rng, hours, 0.97, params.noise)
            + params.event_demand_uplift * event_hours
        )
        demand[r] = np.maximum(scale * level, 0.0)

    shared = np.repeat(_ar1(rng, n_days, params.wind_persistence, params.wind_weather_sd), HOURS_PER_DAY)
    # smooth daily steps into hourly trajectories
    kernel = np.ones(12) / 12.0
    shared = np.convolve(np.r_[np.full(6, shared[0]), shared, np.full(5, shared[-1])], kernel, mode="valid")
    wind = {}
    for r in config.wind_regions:
        local = _ar1(rng, hours, 0.98, 0.6)
        logit = params.wind_mean_logit + 0.35 * winter + shared + local
        cf = 1.0 / (1.0 + np.exp(-logit))
        cf = np.where(event_hours, cf * params.event_wind_factor, cf)
        wind[r] = np.clip(cf, 0.0, 1.0)
    return demand, wind, events


def generate_time_series(
    config: SystemConfig,
    first_year: int = 2001,
    n_years: int = 3,
    seed: int = 0,
    params: SyntheticParams | None = None,
    drop_leap_days: bool = False,
) -> TimeSeriesSet:
    """Contiguous calendar years starting 1 January ``first_year``."""
    params = params or SyntheticParams()
    demand = {r: [] for r in config.demand_regions}
    wind = {r: [] for r in config.wind_regions}
    for year in range(first_year, first_year + n_years):
        start = pd.Timestamp(year=year, month=1, day=1)
        n_days = (pd.Timestamp(year=year + 1, month=1, day=1) - start).days
        if drop_leap_days and n_days == 366:
            raise ValueError("drop_leap_days requires non-leap years to stay contiguous")
        rng = np.random.default_rng([seed, year])
        d, w, _ = _year(config, year, n_days, rng, params, start)
        for r in demand:
            demand[r].append(d[r])
        for r in wind:
            wind[r].append(w[r])
    return TimeSeriesSet(
        start=pd.Timestamp(year=first_year, month=1, day=1),
        demand={r: np.concatenate(v) for r, v in demand.items()},
        wind_cf={r: np.concatenate(v) for r, v in wind.items()},
    )


def generate_days(config: SystemConfig, n_days: int, seed: int = 0, params: SyntheticParams | None = None) -> TimeSeriesSet:
    """A short series: the first ``n_days`` of a synthetic year."""
    full = generate_time_series(config, first_year=2001, n_years=1, seed=seed, params=params)
    return full.slice_days(0, n_days)


@dataclass(frozen=True)
class SyntheticSource:
    """Seed -> independent synthetic series; picklable so experiment workers can use it."""

    config: SystemConfig
    n_years: int = 1
    first_year: int = 2001
    params: SyntheticParams | None = None

    def __call__(self, seed: int) -> TimeSeriesSet:
        return generate_time_series(self.config, self.first_year, self.n_years, seed, self.params)
