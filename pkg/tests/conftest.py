import numpy as np
import pandas as pd
import pytest

from aposteriori.config import SystemConfig, Technology, default_config
from aposteriori.data_io import TimeSeriesSet
from aposteriori.synthetic import generate_days


def single_region(techs=(("peaking", 100000.0, 35.0),), storage=False, **kw) -> SystemConfig:
    return SystemConfig(
        regions=(1,),
        technologies=tuple(Technology(n, ic, gc, (1,)) for n, ic, gc in techs),
        demand_regions=(1,),
        edges=(),
        edge_costs=(),
        storage_regions=(1,) if storage else (),
        storage_install_cost=1000.0 if storage else 0.0,
        storage_efficiency=0.95,
        storage_self_loss=1e-5,
        **kw,
    )


def series(demand: dict, wind: dict | None = None, start="2001-01-01") -> TimeSeriesSet:
    return TimeSeriesSet(
        start=pd.Timestamp(start),
        demand={r: np.asarray(v, dtype=float) for r, v in demand.items()},
        wind_cf={r: np.asarray(v, dtype=float) for r, v in (wind or {}).items()},
    )


@pytest.fixture(scope="session")
def six_bus():
    return default_config()


@pytest.fixture(scope="session")
def days14(six_bus):
    return generate_days(six_bus, 14, seed=3)
