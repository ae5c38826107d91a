"""Random small planning instances shared by unit and acceptance tests."""

import numpy as np
import pandas as pd

from aposteriori.config import SystemConfig, Technology
from aposteriori.data_io import TimeSeriesSet


def _subset(rng, items, allow_empty=False):
    while True:
        pick = tuple(x for x in items if rng.random() < 0.6)
        if pick or allow_empty:
            return pick


def random_two_region(seed: int, n_days: int = 7) -> tuple[SystemConfig, TimeSeriesSet]:
    rng = np.random.default_rng(seed)
    regions = (1, 2)
    wind_regions = _subset(rng, regions, allow_empty=True)
    techs = (
        Technology("baseload", rng.uniform(2e5, 4e5), rng.uniform(2, 8), _subset(rng, regions)),
        Technology("peaking", rng.uniform(5e4, 1.5e5), rng.uniform(25, 45), _subset(rng, regions)),
    )
    if wind_regions:
        techs += (Technology("wind", rng.uniform(5e4, 1.5e5), 0.0, wind_regions, variable=True),)
    config = SystemConfig(
        regions=regions,
        technologies=techs,
        demand_regions=_subset(rng, regions),
        edges=((1, 2),),
        edge_costs=(rng.uniform(5e4, 2e5),),
        storage_regions=_subset(rng, regions, allow_empty=True),
        storage_install_cost=rng.uniform(200, 2000),
        storage_efficiency=rng.uniform(0.8, 1.0),
        storage_self_loss=rng.uniform(0, 1e-3),
        voll=6000.0,
    )
    H = n_days * 24
    hours = np.arange(H)
    demand = {
        r: np.maximum(0.0, 30 + 10 * np.sin(2 * np.pi * (hours - 6 * k) / 24) + rng.normal(0, 4, H))
        for k, r in enumerate(config.demand_regions)
    }
    wind = {}
    for r in wind_regions:
        z = np.cumsum(rng.normal(0, 0.3, H))
        wind[r] = 1 / (1 + np.exp(-(z - z.mean())))
    ts = TimeSeriesSet(pd.Timestamp("2001-01-01"), demand, wind)
    return config, ts


def chain_instance():
    """Two regions in a line with a unique optimum: wind and flow serve region 2 from region 1.

    Returns (config, series, unordered aggregation of six days onto three representatives).
    """
    from aposteriori.aggregation import Aggregation
    from aposteriori.data_io import to_period_matrix

    config = SystemConfig(
        regions=(1, 2),
        technologies=(
            Technology("baseload", 300000.0, 5.0, (1,)),
            Technology("peaking", 100000.0, 35.0, (1,)),
            Technology("wind", 100000.0, 0.0, (2,), variable=True),
        ),
        demand_regions=(2,),
        edges=((1, 2),),
        edge_costs=(100000.0,),
    )
    rng = np.random.default_rng(4)
    h = np.arange(24 * 6)
    demand = 30 + 10 * np.sin(2 * np.pi * h / 24) + rng.normal(0, 2, h.size)
    wind = 1 / (1 + np.exp(-np.cumsum(rng.normal(0, 0.4, h.size))))
    ts = TimeSeriesSet(pd.Timestamp("2001-01-01"), {2: demand}, {2: wind})
    pm = to_period_matrix(ts)
    reps = {k: pm.features[d].copy() for k, d in enumerate((0, 1, 3))}
    agg = Aggregation(np.array([0, 1, 0, 2, 1, 1]), reps, pm.column_labels, ordered=False)
    return config, ts, agg


def weighted_inputs(agg, config):
    """Hourly demand, wind and weights of an aggregation's representatives, laid end to end."""
    rows = agg.representative_matrix()
    col = {label: k for k, label in enumerate(agg.column_labels)}

    def series(name):
        return rows[:, [col[(name, h)] for h in range(1, 25)]].ravel()

    demand = {r: series(f"demand_r{r}") for r in config.demand_regions}
    wind = {r: series(f"wind_r{r}") for r in config.wind_regions}
    weights = np.repeat([agg.weights[k] for k in agg.rep_ids], 24).astype(float)
    return demand, wind, weights


def oracle_values(design, rep_schedule, config) -> dict:
    """Package solution translated to the oracle's variable names (directed flows)."""
    values = {("capg", u): v for u, v in design.cap_gen.items()}
    values.update({("capt", e): v for e, v in design.cap_tr.items()})
    for u, unit in enumerate(rep_schedule.gen_units):
        for h, v in enumerate(rep_schedule.gen[u]):
            values[("g", unit, h)] = v
    for j, (a, b) in enumerate(rep_schedule.edges):
        for h, v in enumerate(rep_schedule.flow[j]):
            values[("f", a, b, h)] = max(v, 0.0)
            values[("f", b, a, h)] = max(-v, 0.0)
    return values
