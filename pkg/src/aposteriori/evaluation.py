"""Accuracy metrics and the multi-seed experiment runners."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np
import pandas as pd

from .config import SystemConfig
from .data_io import TimeSeriesSet, resample_years
from .lp import SolverError
from .siss import SissConfig, SissError, run_siss
from .system_model import (
    CAPACITY_CLASSES, SystemDesign, solve_operation, solve_operation_rolling, solve_planning,
)

logger = logging.getLogger(__name__)

PERCENTILES = (2.5, 25.0, 50.0, 75.0, 97.5)

SeriesSource = Union[TimeSeriesSet, Callable[[int], TimeSeriesSet]]


@dataclass(frozen=True)
class ClassError:
    """Percentage error, or an absolute difference when the truth total is zero."""

    value: float
    absolute: bool = False


def capacity_error(est: SystemDesign, truth: SystemDesign) -> dict[str, ClassError]:
    """Per-class error of ``est`` against ``truth``, summed over regions and edges."""
    if (set(est.cap_gen) != set(truth.cap_gen) or set(est.cap_tr) != set(truth.cap_tr)
            or set(est.cap_sto) != set(truth.cap_sto)):
        raise ValueError("designs belong to different system configurations")
    e, t = est.class_totals(), truth.class_totals()
    out = {}
    for cls in t:
        if t[cls] > 0:
            out[cls] = ClassError(100.0 * (e[cls] - t[cls]) / t[cls])
        else:
            out[cls] = ClassError(e[cls] - t[cls], absolute=True)
    return out


def unserved_percent(ts: TimeSeriesSet, unserved_mwh: float) -> float:
    total = ts.total_demand()
    if total <= 0:
        return 0.0
    return float(min(100.0, max(0.0, 100.0 * unserved_mwh / total)))


def evaluate_unserved(
    ts: TimeSeriesSet,
    design: SystemDesign,
    config: SystemConfig,
    rolling: bool = True,
    horizon_hours: int = 8760,
    window_hours: int = 4380,
) -> float:
    """Unserved energy of ``design`` over all of ``ts`` as a percentage of demand."""
    if rolling:
        schedule = solve_operation_rolling(ts, design, config, horizon_hours, window_hours)
    else:
        schedule = solve_operation(ts, design, config)
    return unserved_percent(ts, float(schedule.unserved.sum()))


# -- experiments ----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    methods: tuple[str, ...] = ("A", "B", "F")
    n_A: tuple[int, ...] = (10,)
    p_e: float = 0.05
    n_years: int | None = 1  # years per resampled series; None uses the source as given
    importance_reduction: str = "sum"
    iterations: int = 1
    horizon_hours: int = 8760
    window_hours: int = 4380
    parallelism: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        for m in self.methods:
            for n in self.n_A:
                SissConfig(n_A=n, p_e=self.p_e, method=m)  # validates the combination

    def siss_config(self, method: str, n_A: int) -> SissConfig:
        return SissConfig(
            n_A=n_A, p_e=self.p_e, method=method, importance_reduction=self.importance_reduction,
            iterations=self.iterations, horizon_hours=self.horizon_hours, window_hours=self.window_hours,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        for key in ("seeds", "methods", "n_A"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class RunRecord:
    seed: int
    method: str
    n_A: int | None
    status: str = "ok"
    message: str = ""
    years: tuple[int, ...] | None = None
    capacities: dict[str, float] = field(default_factory=dict)
    errors: dict[str, float] = field(default_factory=dict)
    error_absolute: dict[str, bool] = field(default_factory=dict)
    unserved_percent: float | None = None
    unserved_percent_rolling: float | None = None  # truth records only
    timings: dict[str, float] = field(default_factory=dict)

    def flat(self, timings: bool = True) -> dict:
        row = {
            "seed": self.seed, "method": self.method, "n_A": self.n_A, "status": self.status,
            "message": self.message, "unserved_percent": self.unserved_percent,
            "unserved_percent_rolling": self.unserved_percent_rolling,
        }
        for cls in CAPACITY_CLASSES:
            row[f"cap_{cls}"] = self.capacities.get(cls)
        for cls in CAPACITY_CLASSES:
            row[f"err_{cls}"] = self.errors.get(cls)
            row[f"err_{cls}_absolute"] = self.error_absolute.get(cls)
        if timings:
            for k, v in self.timings.items():
                row[f"time_{k}"] = v
        return row


@dataclass
class ExperimentReport:
    kind: str  # validation | example
    config: ExperimentConfig
    records: list[RunRecord]
    truth: list[RunRecord] = field(default_factory=list)

    @property
    def has_capacity_errors(self) -> bool:
        return self.kind == "validation"

    def metrics(self) -> list[str]:
        out = ["unserved_percent"]
        if self.has_capacity_errors:
            out += [f"err_{cls}" for cls in CAPACITY_CLASSES]
        return out

    def summary(self) -> dict[str, dict[str, dict[str, float]]]:
        """Percentiles of each metric per ``method/n_A`` over successful runs."""
        out: dict[str, dict[str, dict[str, float]]] = {}
        frame = self.frame(timings=False)
        if frame.empty:
            return out
        ok = frame[frame.status == "ok"]
        for (method, n_a), group in ok.groupby(["method", "n_A"], sort=True):
            entry = {}
            for metric in self.metrics():
                values = group[metric].dropna().to_numpy(dtype=float)
                if values.size:
                    pct = np.percentile(values, PERCENTILES)
                    entry[metric] = {f"p{p:g}": float(v) for p, v in zip(PERCENTILES, pct)}
                    entry[metric]["mean"] = float(values.mean())
            out[f"{method}/{n_a}"] = entry
        return out

    def frame(self, timings: bool = True) -> pd.DataFrame:
        rows = [r.flat(timings) for r in self.records]
        frame = pd.DataFrame(rows)
        if not self.has_capacity_errors and not frame.empty:
            frame = frame.drop(columns=[c for c in frame.columns if c.startswith("err_")])
        return frame

    def to_dict(self, timings: bool = True) -> dict:
        def rec(r: RunRecord) -> dict:
            d = asdict(r)
            if not timings:
                d.pop("timings")
            if not self.has_capacity_errors:
                d.pop("errors")
                d.pop("error_absolute")
            return d

        return {
            "kind": self.kind,
            "config": self.config.to_dict(),
            "truth": [rec(r) for r in self.truth],
            "records": [rec(r) for r in self.records],
            "summary": self.summary(),
        }

    def write(self, out_dir: str | Path, timings: bool = True) -> None:
        """report.json and report.csv; wall-clock data optional so outputs can be compared byte-for-byte."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n")
        self.frame(timings).to_csv(out / "report.csv", index=False, float_format="%.10g")


def _sample(source: SeriesSource, exp: ExperimentConfig, seed: int) -> TimeSeriesSet:
    if callable(source):
        return source(seed)
    if exp.n_years is None:
        return source
    return resample_years(source, exp.n_years, seed)


def _truth_record(ts, config, exp, seed) -> tuple[RunRecord, SystemDesign | None]:
    rec = RunRecord(seed, "truth", None, years=ts.years)
    t0 = time.perf_counter()
    plan = solve_planning(ts, config)
    rec.timings["plan"] = time.perf_counter() - t0
    if not plan.ok:
        rec.status, rec.message = plan.solver_status, plan.message
        return rec, None
    rec.capacities = plan.design.class_totals()
    try:
        t0 = time.perf_counter()
        rec.unserved_percent = evaluate_unserved(ts, plan.design, config, rolling=False)
        rec.timings["evaluate"] = time.perf_counter() - t0
        rec.unserved_percent_rolling = evaluate_unserved(
            ts, plan.design, config, True, exp.horizon_hours, exp.window_hours,
        )
    except SolverError as exc:
        rec.status, rec.message = exc.status, str(exc)
    return rec, plan.design


def _method_record(ts, config, exp, seed, method, n_a, truth: SystemDesign | None) -> RunRecord:
    rec = RunRecord(seed, method, n_a, years=ts.years)
    try:
        res = run_siss(ts, config, exp.siss_config(method, n_a))
    except SissError as exc:
        rec.status, rec.message, rec.timings = "failed", str(exc), exc.timings
        return rec
    except (SolverError, ValueError) as exc:
        rec.status, rec.message = "failed", str(exc)
        return rec
    rec.timings = dict(res.timings)
    rec.timings["evaluate"] = res.evaluation_seconds
    rec.capacities = res.design_final.class_totals()
    rec.unserved_percent = res.unserved_percent
    if truth is not None:
        for cls, err in capacity_error(res.design_final, truth).items():
            rec.errors[cls] = err.value
            rec.error_absolute[cls] = err.absolute
    return rec


def _run_seed(args) -> tuple[RunRecord | None, list[RunRecord]]:
    source, config, exp, seed, with_truth = args
    ts = _sample(source, exp, seed)
    truth_rec, truth = None, None
    if with_truth:
        truth_rec, truth = _truth_record(ts, config, exp, seed)
        if truth is None:
            logger.warning("seed %d: truth solve failed (%s)", seed, truth_rec.message)
    records = []
    for method in exp.methods:
        for n_a in exp.n_A:
            rec = _method_record(ts, config, exp, seed, method, n_a, truth)
            if with_truth and truth is None and rec.status == "ok":
                rec.status, rec.message = "no_truth", "truth solve failed; capacity errors unavailable"
            logger.info("seed %d method %s n_A %d: %s", seed, method, n_a, rec.status)
            records.append(rec)
    return truth_rec, records


def _run(kind: str, source: SeriesSource, config: SystemConfig, exp: ExperimentConfig) -> ExperimentReport:
    with_truth = kind == "validation"
    jobs = [(source, config, exp, seed, with_truth) for seed in exp.seeds]
    if exp.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=exp.parallelism) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = [_run_seed(job) for job in jobs]
    truth = [t for t, _ in results if t is not None]
    records = [r for _, recs in results for r in recs]
    return ExperimentReport(kind, exp, records, truth)


def run_validation_experiment(
    source: SeriesSource, config: SystemConfig, exp: ExperimentConfig,
) -> ExperimentReport:
    """Per seed: sample a series, solve it at full resolution, then score every method against it.

    ``source`` is either a base series resampled by calendar year, or a
    callable mapping a seed to a series.
    """
    return _run("validation", source, config, exp)


def run_example_experiment(
    source: SeriesSource, config: SystemConfig, exp: ExperimentConfig,
) -> ExperimentReport:
    """Like the validation experiment without the full-resolution truth solves."""
    return _run("example", source, config, exp)
