"""Planning and operation linear programs for multi-region systems with storage.

All models share one dispatch block: hourly generation, signed flows on
undirected edges, storage charging split into nonnegative in/out parts,
storage levels and (for operation only) unserved energy. Planning adds
capacity variables; the aggregated planning model replaces chronological
storage levels with per-representative-day profiles linked by one
inter-period level per original day.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .config import HOURS_PER_YEAR, ConfigError, SystemConfig
from .data_io import HOURS_PER_DAY, TimeSeriesSet
from .lp import LinearProgram, SolverError

logger = logging.getLogger(__name__)

CAPACITY_CLASSES = ("baseload", "peaking", "wind", "transmission", "storage")

# Full-horizon planning LPs at least this long go to the interior-point
# solver; shorter ones and all operation LPs use HiGHS for vertex solutions.
LONG_HORIZON_HOURS = 30 * HOURS_PER_DAY
METHOD_ENV = "APOSTERIORI_LP_METHOD"
# Interior-point capacities at or below POLISH_ZERO MW(h) count as unbuilt;
# the rest get POLISH_MARGIN so that vertex dispatch stays feasible.
POLISH_ZERO = 1e-3
POLISH_MARGIN = 1e-4


def _method(kind: str, hours: int = 0) -> str:
    forced = os.environ.get(METHOD_ENV)
    if forced:
        return forced
    if kind == "planning":
        return "clarabel" if hours >= LONG_HORIZON_HOURS else "highs"
    if kind == "aggregated":
        return "highs-ipm"
    return "highs"


# -- designs and schedules ----------------------------------------------------


@dataclass
class SystemDesign:
    cap_gen: dict[tuple[str, int], float]
    cap_tr: dict[tuple[int, int], float]
    cap_sto: dict[int, float]

    @classmethod
    def zero(cls, config: SystemConfig) -> "SystemDesign":
        return cls.from_arrays(
            config, np.zeros(len(config.gen_units)), np.zeros(len(config.edges)),
            np.zeros(len(config.storage_regions)),
        )

    @classmethod
    def from_arrays(cls, config, gen, tr, sto) -> "SystemDesign":
        clip = lambda a: np.maximum(np.asarray(a, dtype=float), 0.0)  # noqa: E731
        return cls(
            cap_gen={u: float(v) for u, v in zip(config.gen_units, clip(gen))},
            cap_tr={e: float(v) for e, v in zip(config.edges, clip(tr))},
            cap_sto={r: float(v) for r, v in zip(config.storage_regions, clip(sto))},
        )

    def gen_array(self, config: SystemConfig) -> np.ndarray:
        return np.array([self.cap_gen.get(u, 0.0) for u in config.gen_units])

    def tr_array(self, config: SystemConfig) -> np.ndarray:
        return np.array([self.cap_tr.get(e, 0.0) for e in config.edges])

    def sto_array(self, config: SystemConfig) -> np.ndarray:
        return np.array([self.cap_sto.get(r, 0.0) for r in config.storage_regions])

    def validate(self, config: SystemConfig) -> None:
        """Raise ConfigError on negative capacities or capacity where topology forbids it."""
        allowed = set(config.gen_units)
        for key, value in self.cap_gen.items():
            if value < 0:
                raise ConfigError(f"negative generation capacity {key}")
            if key not in allowed and value != 0:
                raise ConfigError(f"generation capacity {key} not allowed by topology")
        for (a, b), value in self.cap_tr.items():
            if value < 0:
                raise ConfigError(f"negative transmission capacity {(a, b)}")
            if (min(a, b), max(a, b)) not in config.edges and value != 0:
                raise ConfigError(f"transmission capacity {(a, b)} not allowed by topology")
        for r, value in self.cap_sto.items():
            if value < 0:
                raise ConfigError(f"negative storage capacity in region {r}")
            if r not in config.storage_regions and value != 0:
                raise ConfigError(f"storage capacity in region {r} not allowed by topology")

    def class_totals(self) -> dict[str, float]:
        """Total capacity per technology class (generation techs by name)."""
        totals: dict[str, float] = {}
        for (tech, _), v in self.cap_gen.items():
            totals[tech] = totals.get(tech, 0.0) + v
        totals["transmission"] = sum(self.cap_tr.values())
        totals["storage"] = sum(self.cap_sto.values())
        return totals

    def to_dict(self) -> dict:
        return {
            "generation": [{"tech": t, "region": r, "mw": v} for (t, r), v in self.cap_gen.items()],
            "transmission": [{"from": a, "to": b, "mw": v} for (a, b), v in self.cap_tr.items()],
            "storage": [{"region": r, "mwh": v} for r, v in self.cap_sto.items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SystemDesign":
        return cls(
            cap_gen={(g["tech"], int(g["region"])): float(g["mw"]) for g in data.get("generation", [])},
            cap_tr={(int(t["from"]), int(t["to"])): float(t["mw"]) for t in data.get("transmission", [])},
            cap_sto={int(s["region"]): float(s["mwh"]) for s in data.get("storage", [])},
        )

    def to_frame(self) -> pd.DataFrame:
        rows = [("generation", t, r, "", v, "MW") for (t, r), v in self.cap_gen.items()]
        rows += [("transmission", "", a, b, v, "MW") for (a, b), v in self.cap_tr.items()]
        rows += [("storage", "", r, "", v, "MWh") for r, v in self.cap_sto.items()]
        return pd.DataFrame(rows, columns=["kind", "tech", "region", "to_region", "capacity", "unit"])


@dataclass
class OperationSchedule:
    """Hourly operation. Row order of each array follows the index lists.

    ``storage_level[:, t]`` is the level at the end of hour ``t``;
    ``initial_level`` is the level before the first hour. Charging is kept
    as separate nonnegative in/out flows; ``charge`` is their signed net.
    """

    gen_units: list[tuple[str, int]]
    edges: list[tuple[int, int]]
    storage_regions: list[int]
    demand_regions: list[int]
    gen: np.ndarray
    flow: np.ndarray
    charge_in: np.ndarray
    charge_out: np.ndarray
    storage_level: np.ndarray
    unserved: np.ndarray
    initial_level: np.ndarray = None

    def __post_init__(self):
        if self.initial_level is None:
            self.initial_level = np.zeros(len(self.storage_regions))

    @property
    def horizon(self) -> int:
        return self.gen.shape[1]

    @property
    def charge(self) -> np.ndarray:
        return self.charge_in - self.charge_out

    def slice(self, a: int, b: int) -> "OperationSchedule":
        init = self.initial_level if a == 0 else self.storage_level[:, a - 1]
        return OperationSchedule(
            self.gen_units, self.edges, self.storage_regions, self.demand_regions,
            self.gen[:, a:b], self.flow[:, a:b], self.charge_in[:, a:b], self.charge_out[:, a:b],
            self.storage_level[:, a:b], self.unserved[:, a:b], np.array(init, dtype=float),
        )

    def day(self, t: int) -> "OperationSchedule":
        return self.slice(t * HOURS_PER_DAY, (t + 1) * HOURS_PER_DAY)

    @classmethod
    def concat(cls, parts: list["OperationSchedule"]) -> "OperationSchedule":
        first = parts[0]
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts], axis=1)  # noqa: E731
        return cls(
            first.gen_units, first.edges, first.storage_regions, first.demand_regions,
            cat("gen"), cat("flow"), cat("charge_in"), cat("charge_out"),
            cat("storage_level"), cat("unserved"), first.initial_level,
        )

    def to_frame(self, start: pd.Timestamp | None = None) -> pd.DataFrame:
        cols: dict[str, np.ndarray] = {"hour": np.arange(self.horizon)}
        if start is not None:
            cols["timestamp"] = pd.date_range(start, periods=self.horizon, freq="h").strftime("%Y-%m-%dT%H:%M:%S")
        for k, (tech, r) in enumerate(self.gen_units):
            cols[f"gen_{tech}_r{r}"] = self.gen[k]
        for k, (a, b) in enumerate(self.edges):
            cols[f"flow_{a}_{b}"] = self.flow[k]
        for k, r in enumerate(self.storage_regions):
            cols[f"charge_r{r}"] = self.charge[k]
            cols[f"level_r{r}"] = self.storage_level[k]
        for k, r in enumerate(self.demand_regions):
            cols[f"unserved_r{r}"] = self.unserved[k]
        return pd.DataFrame(cols)


@dataclass
class PlanResult:
    design: SystemDesign | None
    schedule: OperationSchedule | None
    objective: float
    solver_status: str
    message: str = ""
    # Aggregated solves only: inter-period levels (storage region x original day)
    # and intra-period profiles (storage region x representative x hour).
    inter_level: np.ndarray | None = None
    intra_level: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.solver_status == "optimal"

    def raise_for_status(self) -> "PlanResult":
        if not self.ok:
            raise SolverError(self.solver_status, self.message)
        return self


# -- cost ---------------------------------------------------------------------


def install_cost(design: SystemDesign, config: SystemConfig, hours: int) -> float:
    scale = hours / HOURS_PER_YEAR
    return scale * float(
        config.gen_install_costs() @ design.gen_array(config)
        + config.edge_install_costs() @ design.tr_array(config)
        + config.storage_install_costs() @ design.sto_array(config)
    )


def cost_breakdown(design: SystemDesign, schedule: OperationSchedule, config: SystemConfig) -> dict[str, float]:
    costs = config.gen_costs()
    return {
        "install": install_cost(design, config, schedule.horizon),
        "generation": float(costs @ schedule.gen.sum(axis=1)),
        "unserved": config.voll * float(schedule.unserved.sum()),
    }


def system_cost(design: SystemDesign, schedule: OperationSchedule, config: SystemConfig) -> float:
    """Install cost scaled by horizon/8760 plus generation and lost-load cost."""
    return sum(cost_breakdown(design, schedule, config).values())


# -- shared LP assembly ---------------------------------------------------------


def _availability(config: SystemConfig, ts: TimeSeriesSet, start: int, stop: int) -> np.ndarray:
    """Per-unit hourly availability factor: capacity factor for variable techs, else 1."""
    out = np.ones((len(config.gen_units), stop - start))
    for k, (tech, r) in enumerate(config.gen_units):
        if config.tech(tech).variable:
            if r not in ts.wind_cf:
                raise ConfigError(f"no wind capacity factor series for region {r}")
            out[k] = ts.wind_cf[r][start:stop]
    return out


@dataclass
class _Dispatch:
    gen: np.ndarray
    flow: np.ndarray
    cin: np.ndarray
    cout: np.ndarray
    level: np.ndarray
    unserved: np.ndarray | None
    cap_gen: np.ndarray | None = None
    cap_tr: np.ndarray | None = None
    cap_sto: np.ndarray | None = None


def _build_dispatch(
    lp: LinearProgram,
    config: SystemConfig,
    demand: np.ndarray,
    avail: np.ndarray,
    hour_weight: np.ndarray,
    *,
    design: SystemDesign | None,
    slack: bool,
    install_scale: float = 1.0,
    day_reset: bool = False,
    initial_level: np.ndarray | None = None,
) -> _Dispatch:
    """Add dispatch variables and constraints for ``H`` hours.

    ``demand`` is (regions x H) over ``config.regions``; ``avail`` is
    (units x H). With ``design`` None, capacity variables are created and
    costed at ``install_scale``. ``day_reset`` builds intra-day storage
    profiles that restart from zero every 24 hours and are sign-free.
    """
    units, edges, sto = config.gen_units, config.edges, config.storage_regions
    H = demand.shape[1]
    e, keep = config.storage_efficiency, 1.0 - config.storage_self_loss

    gen = lp.add_variables("gen", (len(units), H), cost=config.gen_costs()[:, None] * hour_weight[None, :])
    flow = lp.add_variables("flow", (len(edges), H), lb=-np.inf)
    cin = lp.add_variables("charge_in", (len(sto), H))
    cout = lp.add_variables("charge_out", (len(sto), H))
    level = lp.add_variables("level", (len(sto), H), lb=-np.inf if day_reset else 0.0)
    dem_pos = [config.region_index(r) for r in config.demand_regions]
    unserved = None
    if slack:
        unserved = lp.add_variables(
            "unserved", (len(dem_pos), H), cost=config.voll * hour_weight[None, :],
        )

    d = _Dispatch(gen, flow, cin, cout, level, unserved)
    if design is None:
        d.cap_gen = lp.add_variables("cap_gen", len(units), cost=install_scale * config.gen_install_costs())
        d.cap_tr = lp.add_variables("cap_tr", len(edges), cost=install_scale * config.edge_install_costs())
        d.cap_sto = lp.add_variables("cap_sto", len(sto), cost=install_scale * config.storage_install_costs())
        lp.add_le([(1.0, gen), (-avail, d.cap_gen[:, None])], 0.0)
        lp.add_le([(1.0, flow), (-1.0, d.cap_tr[:, None])], 0.0)
        lp.add_le([(-1.0, flow), (-1.0, d.cap_tr[:, None])], 0.0)
        if not day_reset:
            lp.add_le([(1.0, level), (-1.0, d.cap_sto[:, None])], 0.0)
    else:
        lp.set_bounds(gen, ub=design.gen_array(config)[:, None] * avail)
        cap_tr = design.tr_array(config)[:, None]
        lp.set_bounds(flow, lb=np.broadcast_to(-cap_tr, flow.shape), ub=np.broadcast_to(cap_tr, flow.shape))
        if not day_reset:
            lp.set_bounds(level, ub=np.broadcast_to(design.sto_array(config)[:, None], level.shape))

    # demand balance per region
    sto_pos = {r: k for k, r in enumerate(sto)}
    for k, r in enumerate(config.regions):
        terms = [(1.0, gen[u]) for u, (_, ur) in enumerate(units) if ur == r]
        for j, (a, b) in enumerate(edges):
            if b == r:
                terms.append((1.0, flow[j]))
            elif a == r:
                terms.append((-1.0, flow[j]))
        if r in sto_pos:
            terms += [(-1.0, cin[sto_pos[r]]), (1.0, cout[sto_pos[r]])]
        if slack and r in config.demand_regions:
            terms.append((1.0, unserved[config.demand_regions.index(r)]))
        if not terms:
            if np.any(demand[k] > 0):
                raise ConfigError(f"region {r} has demand but no way to supply it")
            continue
        lp.add_eq(terms, demand[k])

    # storage continuity; level_h = keep * level_{h-1} + e * in_h - out_h / e
    if sto:
        hours = np.arange(H)
        first = (hours % HOURS_PER_DAY == 0) if day_reset else (hours == 0)
        rest = ~first
        init = np.zeros(len(sto)) if initial_level is None else np.asarray(initial_level, dtype=float)
        rhs_first = np.zeros((len(sto), int(first.sum())))
        if not day_reset:
            rhs_first = keep * init[:, None]
        lp.add_eq([(1.0, level[:, first]), (-e, cin[:, first]), (1.0 / e, cout[:, first])], rhs_first)
        if rest.any():
            prev = hours[rest] - 1
            lp.add_eq(
                [(1.0, level[:, rest]), (-keep, level[:, prev]), (-e, cin[:, rest]), (1.0 / e, cout[:, rest])],
                0.0,
            )
    return d


def _schedule_from(lp, sol, d: _Dispatch, config: SystemConfig, initial_level=None) -> OperationSchedule:
    x = sol.x
    val = lambda idx: np.maximum(x[idx], 0.0)  # noqa: E731
    unserved = val(d.unserved) if d.unserved is not None else np.zeros((len(config.demand_regions), d.gen.shape[1]))
    return OperationSchedule(
        gen_units=list(config.gen_units), edges=list(config.edges),
        storage_regions=list(config.storage_regions), demand_regions=list(config.demand_regions),
        gen=val(d.gen), flow=x[d.flow], charge_in=val(d.cin), charge_out=val(d.cout),
        storage_level=x[d.level], unserved=unserved,
        initial_level=None if initial_level is None else np.asarray(initial_level, dtype=float),
    )


def _all_costs_zero(config: SystemConfig) -> bool:
    return not (
        np.any(config.gen_install_costs() > 0) or np.any(config.edge_install_costs() > 0)
        or np.any(config.storage_install_costs() > 0) or np.any(config.gen_costs() > 0)
    )


# -- planning -------------------------------------------------------------------


def solve_planning(ts: TimeSeriesSet, config: SystemConfig) -> PlanResult:
    """Jointly optimal design and operation over the full series (no lost load)."""
    ts.check_against(config)
    if _all_costs_zero(config):
        return PlanResult(None, None, float("nan"), "error", "all costs are zero; optimal design is unbounded")
    H = ts.length
    lp = LinearProgram()
    d = _build_dispatch(
        lp, config, ts.demand_matrix(config.regions), _availability(config, ts, 0, H), np.ones(H),
        design=None, slack=False, install_scale=H / HOURS_PER_YEAR,
    )
    method = _method("planning", H)
    sol = lp.solve(method)
    if not sol.optimal:
        return PlanResult(None, None, sol.objective, sol.status, sol.message)
    design = SystemDesign.from_arrays(config, sol.x[d.cap_gen], sol.x[d.cap_tr], sol.x[d.cap_sto])
    if method != "clarabel":
        return PlanResult(design, _schedule_from(lp, sol, d, config), sol.objective, "optimal", sol.message)
    return _polish(ts, config, design, sol)


def _polish(ts: TimeSeriesSet, config: SystemConfig, design: SystemDesign, sol) -> PlanResult:
    """Turn an interior-point plan into an exactly feasible one.

    Interior-point iterates satisfy bounds only to a relative tolerance,
    which leaves absolute violations of ~1e-5 MW on near-zero capacities.
    Capacities are snapped (near-zero to zero, others up by a small
    margin) and dispatch is re-solved at a vertex with the lost-load slack
    available, so the schedule is feasible to HiGHS precision.
    """
    def snap(a):
        a = np.asarray(a, dtype=float)
        return np.where(a <= POLISH_ZERO, 0.0, a + POLISH_MARGIN)

    fixed = SystemDesign.from_arrays(
        config, snap(design.gen_array(config)), snap(design.tr_array(config)), snap(design.sto_array(config)),
    )
    schedule, _ = _operate(ts, fixed, config, 0, ts.length, None)
    objective = system_cost(fixed, schedule, config)
    logger.debug("polished plan: objective %.10g -> %.10g", sol.objective, objective)
    return PlanResult(fixed, schedule, objective, "optimal", sol.message)


# -- operation ------------------------------------------------------------------


def _operate(ts, design, config, start, stop, initial_level) -> tuple[OperationSchedule, float]:
    lp = LinearProgram()
    d = _build_dispatch(
        lp, config, ts.demand_matrix(config.regions, start, stop), _availability(config, ts, start, stop),
        np.ones(stop - start), design=design, slack=True, initial_level=initial_level,
    )
    sol = lp.solve(_method("operation"))
    if not sol.optimal:
        raise SolverError(sol.status, sol.message)
    return _schedule_from(lp, sol, d, config, initial_level), sol.objective


def solve_operation(
    ts: TimeSeriesSet, design: SystemDesign, config: SystemConfig, initial_level=None,
) -> OperationSchedule:
    """Least-cost dispatch of a fixed design, with unserved energy at VoLL."""
    ts.check_against(config)
    design.validate(config)
    schedule, _ = _operate(ts, design, config, 0, ts.length, initial_level)
    return schedule


def rolling_windows(length: int, horizon_hours: int = 8760, window_hours: int = 4380) -> list[tuple[int, int, int]]:
    """(solve_start, solve_stop, store_stop) for each sequential solve.

    Each solve covers ``horizon_hours`` (truncated at the series end) and
    keeps the first ``window_hours``; the solve reaching the end keeps
    everything it covers.
    """
    if window_hours < 1 or window_hours > horizon_hours:
        raise ValueError("need 1 <= window_hours <= horizon_hours")
    out, start = [], 0
    while True:
        stop = min(start + horizon_hours, length)
        if stop >= length:
            out.append((start, length, length))
            return out
        out.append((start, stop, start + window_hours))
        start += window_hours


def solve_operation_rolling(
    ts: TimeSeriesSet,
    design: SystemDesign,
    config: SystemConfig,
    horizon_hours: int = 8760,
    window_hours: int = 4380,
) -> OperationSchedule:
    """Sequential limited-foresight dispatch, stitched at window boundaries.

    Series shorter than the horizon are solved in one piece.
    """
    ts.check_against(config)
    design.validate(config)
    parts = []
    level = np.zeros(len(config.storage_regions))
    for a, b, keep in rolling_windows(ts.length, horizon_hours, window_hours):
        sched, _ = _operate(ts, design, config, a, b, level)
        part = sched.slice(0, keep - a)
        part.initial_level = level
        parts.append(part)
        level = part.storage_level[:, -1].copy() if part.horizon else level
        logger.debug("rolling solve [%d, %d) stored to %d", a, b, keep)
    stitched = OperationSchedule.concat(parts)
    stitched.initial_level = np.zeros(len(config.storage_regions))
    return stitched


# -- aggregated planning ----------------------------------------------------------


def _rep_arrays(agg, config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Demand (regions x K*24) and availability (units x K*24) of representative days."""
    reps = agg.representative_matrix()
    K = reps.shape[0]
    col = {label: k for k, label in enumerate(agg.column_labels)}

    def series(name):
        idx = [col[(name, h)] for h in range(1, HOURS_PER_DAY + 1)]
        return reps[:, idx].reshape(K * HOURS_PER_DAY)

    demand = np.zeros((len(config.regions), K * HOURS_PER_DAY))
    for r in config.demand_regions:
        if ("demand_r%d" % r, 1) not in col:
            raise ConfigError(f"aggregation lacks demand series for region {r}")
        demand[config.region_index(r)] = series(f"demand_r{r}")
    avail = np.ones((len(config.gen_units), K * HOURS_PER_DAY))
    for k, (tech, r) in enumerate(config.gen_units):
        if config.tech(tech).variable:
            if (f"wind_r{r}", 1) not in col:
                raise ConfigError(f"aggregation lacks wind series for region {r}")
            avail[k] = series(f"wind_r{r}")
    return demand, avail


def solve_planning_aggregated(agg, config: SystemConfig) -> PlanResult:
    """Plan over representative days.

    Generation costs of each representative day are weighted by its
    occurrence count. For ordered aggregations, storage is modelled with
    one intra-day profile per representative (starting at zero) plus one
    inter-period level per original day, and the combined level is kept
    within [0, capacity] at every hour of every original day.

    The returned schedule is expanded back onto the original chronology.
    """
    agg.validate()
    sto = config.storage_regions
    if not agg.ordered and sto:
        raise ConfigError("weighted (unordered) aggregation cannot represent storage")
    if _all_costs_zero(config):
        return PlanResult(None, None, float("nan"), "error", "all costs are zero; optimal design is unbounded")

    ids = agg.rep_ids
    pos = {rid: k for k, rid in enumerate(ids)}
    K, n_T = len(ids), agg.n_periods
    weights = np.array([agg.weights[rid] for rid in ids], dtype=float)
    demand, avail = _rep_arrays(agg, config)
    H_total = n_T * HOURS_PER_DAY

    lp = LinearProgram()
    d = _build_dispatch(
        lp, config, demand, avail, np.repeat(weights, HOURS_PER_DAY),
        design=None, slack=False, install_scale=H_total / HOURS_PER_YEAR, day_reset=True,
    )
    mapping = np.array([pos[rid] for rid in agg.mapping])
    keep = 1.0 - config.storage_self_loss
    inter = None
    if sto:
        intra = d.level.reshape(len(sto), K, HOURS_PER_DAY)
        inter = lp.add_variables("inter", (len(sto), n_T), lb=-np.inf)
        lp.add_eq([(1.0, inter[:, 0])], 0.0)
        if n_T > 1:
            lp.add_eq(
                [(1.0, inter[:, 1:]), (-keep ** HOURS_PER_DAY, inter[:, :-1]),
                 (-1.0, intra[:, mapping[:-1], HOURS_PER_DAY - 1])],
                0.0,
            )
        decay = keep ** np.arange(1, HOURS_PER_DAY + 1)  # applied to the day's start level
        inter_b = inter[:, :, None]
        intra_b = intra[:, mapping, :]
        lp.add_le([(-decay, inter_b), (-1.0, intra_b)], 0.0)
        lp.add_le([(decay, inter_b), (1.0, intra_b), (-1.0, d.cap_sto[:, None, None])], 0.0)

    sol = lp.solve(_method("aggregated"))
    if not sol.optimal:
        return PlanResult(None, None, sol.objective, sol.status, sol.message)

    x = sol.x
    design = SystemDesign.from_arrays(config, x[d.cap_gen], x[d.cap_tr], x[d.cap_sto])
    rep = _schedule_from(lp, sol, d, config)
    hours = (mapping[:, None] * HOURS_PER_DAY + np.arange(HOURS_PER_DAY)[None, :]).ravel()
    expand = lambda a: a[:, hours]  # noqa: E731
    inter_val = intra_val = None
    if sto:
        inter_val = x[inter]
        intra_val = x[d.level].reshape(len(sto), K, HOURS_PER_DAY)
        decay = keep ** np.arange(1, HOURS_PER_DAY + 1)
        level = (inter_val[:, :, None] * decay + intra_val[:, mapping, :]).reshape(len(sto), H_total)
    else:
        level = np.zeros((0, H_total))
    schedule = OperationSchedule(
        rep.gen_units, rep.edges, rep.storage_regions, rep.demand_regions,
        expand(rep.gen), expand(rep.flow), expand(rep.charge_in), expand(rep.charge_out),
        level, np.zeros((len(config.demand_regions), H_total)),
    )
    return PlanResult(
        design, schedule, sol.objective, "optimal", sol.message,
        inter_level=inter_val, intra_level=intra_val, extras={"representative_schedule": rep},
    )


# -- verification -------------------------------------------------------------------


def constraint_residuals(
    ts: TimeSeriesSet, design: SystemDesign, schedule: OperationSchedule, config: SystemConfig, start: int = 0,
) -> dict[str, float]:
    """Largest scaled violation of each constraint family (0 means satisfied).

    ``start`` offsets into ``ts`` when the schedule covers a sub-range.
    """
    H = schedule.horizon
    stop = start + H
    demand = ts.demand_matrix(config.regions, start, stop)
    avail = _availability(config, ts, start, stop)
    cap_g, cap_t, cap_s = design.gen_array(config), design.tr_array(config), design.sto_array(config)

    inflow = np.zeros((len(config.regions), H))
    for u, (_, r) in enumerate(config.gen_units):
        inflow[config.region_index(r)] += schedule.gen[u]
    for j, (a, b) in enumerate(config.edges):
        inflow[config.region_index(b)] += schedule.flow[j]
        inflow[config.region_index(a)] -= schedule.flow[j]
    for k, r in enumerate(config.storage_regions):
        inflow[config.region_index(r)] -= schedule.charge[k]
    for k, r in enumerate(config.demand_regions):
        inflow[config.region_index(r)] += schedule.unserved[k]
    balance = np.abs(inflow - demand) / np.maximum(1.0, demand)

    e, keep = config.storage_efficiency, 1.0 - config.storage_self_loss
    prev = np.concatenate([schedule.initial_level[:, None], schedule.storage_level[:, :-1]], axis=1)
    expected = keep * prev + e * schedule.charge_in - schedule.charge_out / e
    scale_s = np.maximum(1.0, cap_s)[:, None]
    continuity = np.abs(schedule.storage_level - expected) / scale_s

    gen_cap = (schedule.gen - cap_g[:, None] * avail) / np.maximum(1.0, cap_g)[:, None]
    flow_cap = (np.abs(schedule.flow) - cap_t[:, None]) / np.maximum(1.0, cap_t)[:, None]
    level_hi = (schedule.storage_level - cap_s[:, None]) / scale_s
    level_lo = -schedule.storage_level / scale_s

    def worst(a):
        return float(np.max(a, initial=0.0))

    return {
        "balance": worst(balance),
        "storage_continuity": worst(continuity),
        "generation_capacity": max(worst(gen_cap), 0.0),
        "transmission_capacity": max(worst(flow_cap), 0.0),
        "storage_upper": max(worst(level_hi), 0.0),
        "storage_lower": max(worst(level_lo), 0.0),
        "nonnegativity": max(
            worst(-schedule.gen), worst(-schedule.unserved), worst(-schedule.charge_in), worst(-schedule.charge_out), 0.0,
        ),
    }
