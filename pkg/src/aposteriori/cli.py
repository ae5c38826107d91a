"""Command-line entry point.

Every subcommand writes into ``--out``: the effective system config
(``config.cfg``), the invocation (``invocation.json``) and its own
artifacts. Wall-clock measurements go to ``timings.log`` so the JSON and
CSV outputs stay byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import aggregate_a_priori
from .config import ConfigError, SystemConfig, config_to_ini, load_config
from .data_io import DataError, load_time_series, to_period_matrix, write_time_series
from .evaluation import (
    ExperimentConfig, evaluate_unserved, run_example_experiment, run_validation_experiment,
)
from .lp import SolverError
from .siss import A_PRIORI, IMPORTANCES, METHODS, SissConfig, SissError, run_siss
from .synthetic import SyntheticSource, generate_time_series
from .system_model import (
    SystemDesign, cost_breakdown, solve_operation, solve_operation_rolling, solve_planning,
)

logger = logging.getLogger("aposteriori")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(x) for x in text.split(",") if x.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="system config file (default: shipped six-bus system)")
    common.add_argument("--set", dest="overrides", action="append", type=_override, default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config value; repeatable")
    common.add_argument("--out", required=True, help="output directory (created if absent)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    data = _Parser(add_help=False)
    data.add_argument("--data", required=True, help="hourly time series CSV")

    rolling = _Parser(add_help=False)
    rolling.add_argument("--horizon", type=int, default=8760, help="rolling solve length in hours")
    rolling.add_argument("--window", type=int, default=4380, help="hours kept from each rolling solve")

    method = _Parser(add_help=False)
    method.add_argument("--method", choices=METHODS, default="F")
    method.add_argument("--n-a", dest="n_a", type=int, default=30, help="representative-day budget")
    method.add_argument("--p-e", dest="p_e", type=float, default=0.05, help="extreme-day fraction")
    method.add_argument("--importance", choices=IMPORTANCES)
    method.add_argument("--reduction", choices=("sum", "max"), default="sum")
    method.add_argument("--iterations", type=int, default=1)

    parser = _Parser(prog="aposteriori", description="Capacity planning with importance-subsampled days.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("plan", parents=[common, data], help="full-resolution planning solve")

    p = sub.add_parser("operate", parents=[common, data, rolling], help="dispatch a fixed design")
    p.add_argument("--design", required=True, help="design JSON")
    p.add_argument("--mode", choices=("rolling", "full"), default="rolling")

    sub.add_parser("aggregate", parents=[common, data, method, rolling], help="emit the aggregation a method plans on")
    sub.add_parser("siss", parents=[common, data, method, rolling], help="run one aggregation method end to end")

    p = sub.add_parser("evaluate", parents=[common, data, rolling], help="unserved energy of a design")
    p.add_argument("--design", required=True, help="design JSON")
    p.add_argument("--mode", choices=("rolling", "full"), default="rolling")

    for name, text in (("validate", "experiment with full-resolution truth"), ("example", "experiment without truth")):
        p = sub.add_parser(name, parents=[common, rolling], help=text)
        p.add_argument("--data", help="base series resampled by calendar year (default: synthetic per seed)")
        p.add_argument("--experiment", help="experiment JSON; flags given explicitly take precedence")
        p.add_argument("--seeds", type=int, help="number of seeds, starting at --seed")
        p.add_argument("--methods", type=_csv_list(str))
        p.add_argument("--n-a", dest="n_a", type=_csv_list(int))
        p.add_argument("--p-e", dest="p_e", type=float)
        p.add_argument("--years", type=int, help="years per sampled series")
        p.add_argument("--parallel", type=int, help="worker processes")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic time series CSV")
    p.add_argument("--years", type=int, default=1)
    p.add_argument("--first-year", type=int, default=2001)
    return parser


# -- subcommands ------------------------------------------------------------------


def _timings_log(out: Path, rows: list[tuple[str, float]]) -> None:
    with open(out / "timings.log", "w") as fh:
        for name, seconds in rows:
            fh.write(f"{name}\t{seconds:.6f}\n")


def _load_design(path: str, config: SystemConfig) -> SystemDesign:
    try:
        design = SystemDesign.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read design {path}: {exc}") from exc
    design.validate(config)
    return design


def _siss_config(args) -> SissConfig:
    return SissConfig(
        n_A=args.n_a, p_e=args.p_e, method=args.method, importance=args.importance,
        importance_reduction=args.reduction, iterations=args.iterations,
        horizon_hours=args.horizon, window_hours=args.window,
    )


def cmd_plan(args, config, out: Path) -> int:
    ts = load_time_series(args.data, config)
    res = solve_planning(ts, config).raise_for_status()
    _dump(out / "design.json", res.design.to_dict())
    res.schedule.to_frame(ts.start).to_csv(out / "schedule.csv", float_format="%.10g")
    _dump(out / "plan.json", {
        "status": res.solver_status, "objective": res.objective,
        "cost_breakdown": cost_breakdown(res.design, res.schedule, config),
        "capacity_totals": res.design.class_totals(),
    })
    print(f"objective {res.objective:.6g}; capacities {_fmt_totals(res.design)}")
    return EXIT_OK


def cmd_operate(args, config, out: Path) -> int:
    ts = load_time_series(args.data, config)
    design = _load_design(args.design, config)
    if args.mode == "full":
        schedule = solve_operation(ts, design, config)
    else:
        schedule = solve_operation_rolling(ts, design, config, args.horizon, args.window)
    schedule.to_frame(ts.start).to_csv(out / "schedule.csv", float_format="%.10g")
    unserved = float(schedule.unserved.sum())
    total = ts.total_demand()
    _dump(out / "operation.json", {
        "mode": args.mode, "unserved_mwh": unserved,
        "unserved_percent": 100.0 * unserved / total if total > 0 else 0.0,
        "cost_breakdown": cost_breakdown(design, schedule, config),
    })
    print(f"unserved energy {unserved:.6g} MWh")
    return EXIT_OK


def cmd_aggregate(args, config, out: Path) -> int:
    ts = load_time_series(args.data, config)
    cfg = _siss_config(args)
    if cfg.a_posteriori:
        from dataclasses import replace
        agg = run_siss(ts, config, replace(cfg, evaluate=False)).aggregation_1
    else:
        kind, heuristic = A_PRIORI[cfg.method]
        agg = aggregate_a_priori(to_period_matrix(ts), cfg.n_A, kind, heuristic)
    _dump(out / "aggregation.json", agg.to_dict())
    print(f"{len(agg.representatives)} representative days for {agg.n_periods} days")
    return EXIT_OK


def cmd_siss(args, config, out: Path) -> int:
    ts = load_time_series(args.data, config)
    res = run_siss(ts, config, _siss_config(args))
    data = res.to_dict()
    data["stages"] = list(data.pop("timings"))
    data.pop("evaluation_seconds")
    _dump(out / "siss_result.json", data)
    _dump(out / "design.json", res.design_final.to_dict())
    if res.importances is not None:
        res.importance_frame().to_csv(out / "importances.csv", index=False, float_format="%.10g")
    _timings_log(out, list(res.timings.items()) + [("evaluate", res.evaluation_seconds)])
    stages = " + ".join(f"{v:.2f}" for v in res.timings.values())
    print(f"method {res.method}: unserved {res.unserved_percent:.6g}% of demand; stage seconds {stages}")
    return EXIT_OK


def cmd_evaluate(args, config, out: Path) -> int:
    ts = load_time_series(args.data, config)
    design = _load_design(args.design, config)
    pct = evaluate_unserved(ts, design, config, args.mode == "rolling", args.horizon, args.window)
    _dump(out / "evaluation.json", {"mode": args.mode, "unserved_percent": pct})
    print(f"unserved energy {pct:.6g}% of demand")
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    base = {}
    if args.experiment:
        try:
            base = json.loads(Path(args.experiment).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read experiment config {args.experiment}: {exc}") from exc
        base.pop("dataset", None)
    if args.seeds is not None:
        base["seeds"] = list(range(args.seed, args.seed + args.seeds))
    for flag, key in (("methods", "methods"), ("n_a", "n_A"), ("p_e", "p_e"), ("years", "n_years"),
                      ("parallel", "parallelism")):
        if getattr(args, flag) is not None:
            base[key] = getattr(args, flag)
    base.setdefault("horizon_hours", args.horizon)
    base.setdefault("window_hours", args.window)
    try:
        return ExperimentConfig.from_dict(base)
    except TypeError as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc


def cmd_experiment(args, config, out: Path) -> int:
    exp = _experiment_config(args)
    if args.data:
        source = load_time_series(args.data, config)
    else:
        source = SyntheticSource(config, exp.n_years or 1)
    runner = run_validation_experiment if args.command == "validate" else run_example_experiment
    report = runner(source, config, exp)
    report.write(out, timings=False)
    rows = []
    for rec in report.truth + report.records:
        rows += [(f"seed={rec.seed} method={rec.method} n_A={rec.n_A} {k}", v) for k, v in rec.timings.items()]
    _timings_log(out, rows)
    failed = sum(r.status != "ok" for r in report.records)
    print(f"{len(report.records)} runs ({failed} not ok); report written to {out}")
    return EXIT_OK


def cmd_synth(args, config, out: Path) -> int:
    ts = generate_time_series(config, args.first_year, args.years, args.seed)
    write_time_series(ts, out / "timeseries.csv")
    print(f"{ts.length} hours written")
    return EXIT_OK


COMMANDS = {
    "plan": cmd_plan, "operate": cmd_operate, "aggregate": cmd_aggregate, "siss": cmd_siss,
    "evaluate": cmd_evaluate, "validate": cmd_experiment, "example": cmd_experiment, "synth": cmd_synth,
}


def _fmt_totals(design: SystemDesign) -> str:
    return ", ".join(f"{k} {v:.6g}" for k, v in design.class_totals().items())


def _invocation(args) -> dict:
    skip = {"out", "verbose"}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s",
    )
    np.seterr(all="ignore")
    try:
        config = load_config(args.config, dict(args.overrides))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.cfg").write_text(config_to_ini(config))
        _dump(out / "invocation.json", _invocation(args))
        return COMMANDS[args.command](args, config, out)
    except SissError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER if isinstance(exc.cause, SolverError) else EXIT_INVALID
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
