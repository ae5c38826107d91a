"""Storage importance subsampling: two-stage a-posteriori aggregation.

Methods A-C are a-priori (one planning solve on clustered days). Methods
D-F first plan on medoid-clustered days, operate that design across the
full series, score each day by an importance function of its operation,
then re-aggregate with the most important days clustered separately and
plan again.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .aggregation import (
    Aggregation, aggregate_a_priori, aggregate_stratified, importance_partition, storage_matrix,
)
from .config import SystemConfig
from .data_io import HOURS_PER_DAY, TimeSeriesSet, to_period_matrix
from .lp import SolverError
from .system_model import (
    OperationSchedule, PlanResult, SystemDesign, solve_operation_rolling, solve_planning_aggregated,
)

logger = logging.getLogger(__name__)

METHODS = ("A", "B", "C", "D", "E", "F")
A_PRIORI = {"A": ("mean", "none"), "B": ("medoid", "none"), "C": ("medoid", "max_demand_min_wind")}
DEFAULT_IMPORTANCE = {"D": "unserved_energy", "E": "generation_cost", "F": "generation_cost"}
IMPORTANCES = ("generation_cost", "unserved_energy")


class SissError(RuntimeError):
    """A stage failed; ``timings`` holds the stages completed (and the failed one)."""

    def __init__(self, stage: str, cause: Exception, timings: dict[str, float]):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.timings = timings


@dataclass(frozen=True)
class SissConfig:
    n_A: int = 30
    p_e: float = 0.05
    method: str = "F"
    importance: str | None = None  # None: the method's default
    importance_reduction: str = "sum"
    iterations: int = 1
    horizon_hours: int = 8760
    window_hours: int = 4380
    normalization: str = "series"
    linkage: str = "ward"
    evaluate: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 < self.p_e < 1.0:
            raise ValueError("p_e must lie strictly between 0 and 1")
        if self.n_A < 1:
            raise ValueError("n_A must be positive")
        if self.a_posteriori and self.n_A % 2:
            raise ValueError(f"method {self.method} needs an even n_A, got {self.n_A}")
        if self.importance is not None and self.importance not in IMPORTANCES:
            raise ValueError(f"unknown importance {self.importance!r}")
        if self.importance_reduction not in ("sum", "max"):
            raise ValueError("importance_reduction must be 'sum' or 'max'")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")

    @property
    def a_posteriori(self) -> bool:
        return self.method in DEFAULT_IMPORTANCE

    @property
    def importance_kind(self) -> str | None:
        if not self.a_posteriori:
            return None
        return self.importance or DEFAULT_IMPORTANCE[self.method]


@dataclass
class SissResult:
    method: str
    design_0: SystemDesign
    design_final: SystemDesign
    plan_final: PlanResult
    aggregation_0: Aggregation
    aggregation_1: Aggregation | None = None
    importances: np.ndarray | None = None
    partition: tuple[np.ndarray, np.ndarray] | None = None
    timings: dict[str, float] = field(default_factory=dict)
    evaluation_seconds: float = 0.0
    unserved_full: float | None = None  # MWh
    unserved_percent: float | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "design_0": self.design_0.to_dict(),
            "design_final": self.design_final.to_dict(),
            "objective_final": self.plan_final.objective,
            "timings": dict(self.timings),
            "evaluation_seconds": self.evaluation_seconds,
            "unserved_mwh": self.unserved_full,
            "unserved_percent": self.unserved_percent,
            "importances": None if self.importances is None else [float(v) for v in self.importances],
            "partition": None,
        }
        if self.partition is not None:
            out["partition"] = {
                "extreme": [int(d) for d in self.partition[0]],
                "regular": [int(d) for d in self.partition[1]],
            }
        return out

    def importance_frame(self) -> pd.DataFrame:
        """Per-day importances plus their rank, for duration-curve plots."""
        imp = np.zeros(0) if self.importances is None else self.importances
        order = np.lexsort((np.arange(imp.size), -imp))
        rank = np.empty(imp.size, dtype=int)
        rank[order] = np.arange(1, imp.size + 1)
        extreme = np.zeros(imp.size, dtype=bool)
        if self.partition is not None:
            extreme[self.partition[0]] = True
        return pd.DataFrame({"day": np.arange(imp.size), "importance": imp, "rank": rank, "extreme": extreme})


# -- importance functions -------------------------------------------------------


def _reduce(hourly: np.ndarray, reduction: str) -> np.ndarray:
    if reduction == "sum":
        return hourly.sum(axis=-1)
    if reduction == "max":
        return hourly.max(axis=-1, initial=0.0)
    raise ValueError(f"unknown reduction {reduction!r}")


def hourly_generation_cost(schedule: OperationSchedule, config: SystemConfig) -> np.ndarray:
    costs = np.array([config.tech(t).generation_cost for t, _ in schedule.gen_units])
    return costs @ schedule.gen + config.voll * schedule.unserved.sum(axis=0)


def importance_generation_cost(day: OperationSchedule, config: SystemConfig, reduction: str = "sum") -> float:
    """Generation cost of one day, lost load priced at the value of lost load."""
    return float(_reduce(hourly_generation_cost(day, config), reduction))


def importance_unserved(day: OperationSchedule, reduction: str = "sum") -> float:
    return float(_reduce(day.unserved.sum(axis=0), reduction))


def daily_importances(
    schedule: OperationSchedule, config: SystemConfig, kind: str, reduction: str = "sum",
) -> np.ndarray:
    """One importance value per whole day of ``schedule``."""
    if kind == "generation_cost":
        hourly = hourly_generation_cost(schedule, config)
    elif kind == "unserved_energy":
        hourly = schedule.unserved.sum(axis=0)
    else:
        raise ValueError(f"unknown importance {kind!r}")
    return _reduce(hourly.reshape(-1, HOURS_PER_DAY), reduction)


# -- pipeline -------------------------------------------------------------------------


class _Clock:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, stage, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except (SolverError, ValueError) as exc:
            self.timings[stage] = time.perf_counter() - t0
            raise SissError(stage, exc, dict(self.timings)) from exc
        finally:
            self.timings.setdefault(stage, time.perf_counter() - t0)


def _plan(agg: Aggregation, config: SystemConfig) -> PlanResult:
    return solve_planning_aggregated(agg, config).raise_for_status()


def run_siss(ts: TimeSeriesSet, config: SystemConfig, cfg: SissConfig) -> SissResult:
    """Estimate the optimal design of ``ts`` with aggregation method ``cfg.method``.

    Timing keys are ``plan_0`` for the first planning solve and
    ``operate_i`` / ``plan_i`` for each a-posteriori iteration ``i``.
    """
    ts.check_against(config)
    if ts.n_days < cfg.n_A:
        raise ValueError(f"series has {ts.n_days} days, fewer than n_A={cfg.n_A}")
    pm = to_period_matrix(ts)
    clock = _Clock()

    kind, heuristic = A_PRIORI.get(cfg.method, ("medoid", "none"))
    agg0 = aggregate_a_priori(
        pm, cfg.n_A, kind, heuristic, normalization=cfg.normalization, linkage=cfg.linkage,
    )
    plan = clock.run("plan_0", _plan, agg0, config)
    design_0 = plan.design
    result = SissResult(cfg.method, design_0, design_0, plan, agg0, timings=clock.timings)

    design = design_0
    for i in range(1, cfg.iterations + 1 if cfg.a_posteriori else 1):
        schedule = clock.run(
            f"operate_{i}", solve_operation_rolling, ts, design, config, cfg.horizon_hours, cfg.window_hours,
        )
        imp = daily_importances(schedule, config, cfg.importance_kind, cfg.importance_reduction)
        partition = importance_partition(imp, cfg.p_e)
        features = None
        if cfg.method == "F" and config.storage_regions:
            features = storage_matrix(schedule.charge, config.storage_regions)
        agg1 = aggregate_stratified(
            pm, partition, cfg.n_A, "medoid", features, normalization=cfg.normalization, linkage=cfg.linkage,
        )
        plan = clock.run(f"plan_{i}", _plan, agg1, config)
        design = plan.design
        result.importances, result.partition, result.aggregation_1 = imp, partition, agg1
        logger.info("method %s iteration %d: %d extreme days", cfg.method, i, partition[0].size)

    result.design_final, result.plan_final = design, plan
    result.timings = dict(clock.timings)
    if cfg.evaluate:
        t0 = time.perf_counter()
        schedule = solve_operation_rolling(ts, design, config, cfg.horizon_hours, cfg.window_hours)
        result.evaluation_seconds = time.perf_counter() - t0
        result.unserved_full = float(schedule.unserved.sum())
        total = ts.total_demand()
        result.unserved_percent = 100.0 * result.unserved_full / total if total > 0 else 0.0
    return result
