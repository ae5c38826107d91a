import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aposteriori.aggregation import Aggregation, identity_aggregation
from aposteriori.config import ConfigError, SystemConfig, Technology
from aposteriori.data_io import to_period_matrix
from aposteriori.system_model import (
    OperationSchedule, SystemDesign, constraint_residuals, cost_breakdown, rolling_windows,
    solve_operation, solve_operation_rolling, solve_planning, solve_planning_aggregated, system_cost,
)

from conftest import series, single_region
from instances import chain_instance, oracle_values, random_two_region, weighted_inputs
from oracles import dense_planning_lp, oracle_check

TOL = 1e-6


def _assert_feasible(ts, res, config, tol=TOL):
    worst = constraint_residuals(ts, res.design, res.schedule, config)
    assert all(v <= tol for v in worst.values()), worst


# -- analytic planning cases -------------------------------------------------------


def test_single_peaking_unit():
    cfg = single_region()
    ts = series({1: np.full(24, 10.0)})
    res = solve_planning(ts, cfg)
    assert res.ok
    assert res.design.cap_gen[("peaking", 1)] == pytest.approx(10.0, rel=1e-9)
    expected = 24 / 8760 * 100000 * 10 + 35 * 10 * 24
    assert expected == pytest.approx(11139.73, abs=5e-3)
    assert res.objective == pytest.approx(expected, rel=1e-9)
    assert system_cost(res.design, res.schedule, cfg) == pytest.approx(expected, rel=1e-9)


def test_zero_demand_builds_nothing():
    cfg = single_region((("baseload", 300000.0, 5.0), ("peaking", 100000.0, 35.0)), storage=True)
    res = solve_planning(series({1: np.zeros(48)}), cfg)
    assert res.ok
    assert res.objective == pytest.approx(0.0, abs=1e-9)
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in res.design.class_totals().values())


def test_screening_curve():
    cfg = single_region((("baseload", 300000.0, 5.0), ("peaking", 100000.0, 35.0)))
    demand = np.full(24, 10.0)
    demand[17] = 20.0
    res = solve_planning(series({1: demand}), cfg)
    assert res.design.cap_gen[("baseload", 1)] == pytest.approx(10.0, rel=1e-7)
    assert res.design.cap_gen[("peaking", 1)] == pytest.approx(10.0, rel=1e-7)
    # marginal costs of the two blocks, install scaled to one day
    day = 24 / 8760
    assert day * 300000 + 5 == pytest.approx(826.92, abs=5e-3)
    assert day * 100000 + 35 == pytest.approx(308.97, abs=5e-3)
    assert day * 300000 + 5 * 24 == pytest.approx(941.92, abs=5e-3)
    assert day * 100000 + 35 * 24 == pytest.approx(1113.97, abs=5e-3)


def test_all_costs_zero_is_error():
    cfg = single_region((("free", 0.0, 0.0),))
    res = solve_planning(series({1: np.ones(24)}), cfg)
    assert res.solver_status == "error"
    assert not res.ok


def test_missing_wind_series_rejected(six_bus):
    ts = series({2: np.ones(24), 4: np.ones(24), 5: np.ones(24)}, {2: np.ones(24) * 0.5})
    with pytest.raises(ConfigError):
        solve_planning(ts, six_bus)


# -- operation ------------------------------------------------------------------------


def test_unserved_when_capacity_short():
    cfg = single_region()
    demand = np.zeros(24)
    demand[0] = 12.0
    design = SystemDesign(cap_gen={("peaking", 1): 10.0}, cap_tr={}, cap_sto={})
    sched = solve_operation(series({1: demand}), design, cfg)
    assert sched.unserved.sum() == pytest.approx(2.0, rel=1e-9)
    costs = cost_breakdown(design, sched, cfg)
    assert costs["generation"] + costs["unserved"] == pytest.approx(35 * 10 + 6000 * 2, rel=1e-9)


def test_continuity_substitution():
    # level 100, charge 10 for one hour: 0.99999 * 100 + 0.95 * 10
    cfg = single_region(storage=True)
    assert 0.99999 * 100 + 0.95 * 10 == pytest.approx(109.499, abs=1e-9)
    sched = OperationSchedule(
        gen_units=[("peaking", 1)], edges=[], storage_regions=[1], demand_regions=[1],
        gen=np.full((1, 24), 10.0), flow=np.zeros((0, 24)),
        charge_in=np.r_[10.0, np.zeros(23)][None], charge_out=np.zeros((1, 24)),
        storage_level=np.array([100.0 * 0.99999 ** h + 0 for h in range(1, 25)])[None],
        unserved=np.zeros((1, 24)), initial_level=np.array([100.0]),
    )
    sched.storage_level[0] = [109.499 * 0.99999 ** h for h in range(24)]
    sched.gen[0, 0] = 20.0  # supplies demand plus charging in hour 0
    design = SystemDesign({("peaking", 1): 20.0}, {}, {1: 200.0})
    worst = constraint_residuals(series({1: np.full(24, 10.0)}), design, sched, cfg)
    assert worst["storage_continuity"] <= 1e-12
    assert worst["balance"] <= 1e-12


def test_operation_of_planned_design_serves_everything(days14, six_bus):
    plan = solve_planning(days14, six_bus)
    sched = solve_operation(days14, plan.design, six_bus)
    assert sched.unserved.sum() <= 1e-6 * days14.total_demand()
    _assert_feasible(days14, plan, six_bus)


def test_zero_design_serves_nothing(days14, six_bus):
    sched = solve_operation(days14, SystemDesign.zero(six_bus), six_bus)
    assert sched.unserved.sum() == pytest.approx(days14.total_demand(), rel=1e-9)


# -- LP oracle ---------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_matches_dense_oracle(seed):
    config, ts = random_two_region(seed, n_days=3)
    res = solve_planning(ts, config)
    obj, totals, _ = dense_planning_lp(ts.demand, ts.wind_cf, config)
    assert res.objective == pytest.approx(obj, rel=1e-6)
    assert system_cost(res.design, res.schedule, config) == pytest.approx(res.objective, rel=1e-6)
    _assert_feasible(ts, res, config)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.0, 3.0))
def test_demand_scaling_monotone(seed, alpha):
    config, ts = random_two_region(seed, n_days=2)
    scaled = series({r: alpha * v for r, v in ts.demand.items()}, ts.wind_cf)
    base = solve_planning(ts, config).objective
    assert solve_planning(scaled, config).objective >= base * (1 - 1e-7)


@pytest.mark.parametrize("method", ["clarabel", "highs-ipm"])
def test_solvers_agree(days14, six_bus, monkeypatch, method):
    reference = solve_planning(days14, six_bus)
    monkeypatch.setenv("APOSTERIORI_LP_METHOD", method)
    other = solve_planning(days14, six_bus)
    assert other.objective == pytest.approx(reference.objective, rel=1e-7)
    for cls, v in reference.design.class_totals().items():
        assert other.design.class_totals()[cls] == pytest.approx(v, rel=1e-4, abs=1e-2)
    _assert_feasible(days14, other, six_bus)


def test_long_horizon_uses_interior_point(monkeypatch):
    from aposteriori import system_model
    assert system_model._method("planning", 30 * 24) == "clarabel"
    assert system_model._method("planning", 29 * 24) == "highs"
    assert system_model._method("operation") == "highs"
    monkeypatch.setenv("APOSTERIORI_LP_METHOD", "highs-ds")
    assert system_model._method("planning", 10**6) == "highs-ds"


def test_unknown_solver_rejected():
    from aposteriori.lp import LinearProgram
    lp = LinearProgram()
    lp.add_variables("x", 1, cost=1.0)
    with pytest.raises(ValueError):
        lp.solve("simplex")


# -- rolling horizon -----------------------------------------------------------------


def test_rolling_window_schedule():
    assert len(rolling_windows(30 * 8760)) == 59
    assert rolling_windows(8760) == [(0, 8760, 8760)]
    assert rolling_windows(2 * 8760) == [(0, 8760, 4380), (4380, 13140, 8760), (8760, 17520, 17520)]
    assert rolling_windows(100, 48, 24)[-1] == (72, 100, 100)
    with pytest.raises(ValueError):
        rolling_windows(100, 10, 20)


def test_rolling_single_window_equals_full(days14, six_bus):
    plan = solve_planning(days14, six_bus)
    design = SystemDesign.from_arrays(
        six_bus, 0.9 * plan.design.gen_array(six_bus), plan.design.tr_array(six_bus), plan.design.sto_array(six_bus),
    )
    full = solve_operation(days14, design, six_bus)
    rolled = solve_operation_rolling(days14, design, six_bus, days14.length, days14.length // 2)
    np.testing.assert_array_equal(rolled.gen, full.gen)
    np.testing.assert_array_equal(rolled.unserved, full.unserved)


def test_rolling_stitch_continuity(days14, six_bus):
    plan = solve_planning(days14, six_bus)
    design = SystemDesign.from_arrays(
        six_bus, 0.8 * plan.design.gen_array(six_bus), plan.design.tr_array(six_bus), plan.design.sto_array(six_bus),
    )
    rolled = solve_operation_rolling(days14, design, six_bus, horizon_hours=96, window_hours=48)
    assert rolled.horizon == days14.length
    worst = constraint_residuals(days14, design, rolled, six_bus)
    assert all(v <= TOL for v in worst.values()), worst


# -- aggregated planning ------------------------------------------------------------------


def _no_storage(config: SystemConfig) -> SystemConfig:
    from dataclasses import replace
    return replace(config, storage_regions=(), storage_install_cost=0.0)


def test_weights_from_mapping():
    reps = {k: np.zeros(48) for k in range(3)}
    agg = Aggregation(np.array([0, 2, 0, 1, 2, 2]), reps, tuple(("demand_r1", h) for h in range(1, 49)), ordered=False)
    assert [agg.weights[k] for k in range(3)] == [2, 1, 3]


def test_identity_aggregation_reproduces_full(days14, six_bus):
    full = solve_planning(days14, six_bus)
    agg = solve_planning_aggregated(identity_aggregation(to_period_matrix(days14)), six_bus)
    assert agg.objective == pytest.approx(full.objective, rel=1e-6)
    for cls, v in full.design.class_totals().items():
        assert agg.design.class_totals()[cls] == pytest.approx(v, rel=5e-3, abs=1e-3)


def test_aggregated_storage_bounds_and_expansion(days14, six_bus):
    from aposteriori.aggregation import aggregate_a_priori
    agg = aggregate_a_priori(to_period_matrix(days14), 4, "medoid")
    res = solve_planning_aggregated(agg, six_bus)
    assert res.ok
    assert res.inter_level.shape == (3, 14)
    np.testing.assert_array_equal(res.inter_level[:, 0], 0.0)
    cap = res.design.sto_array(six_bus)[:, None]
    assert np.all(res.schedule.storage_level >= -TOL * np.maximum(1, cap))
    assert np.all(res.schedule.storage_level <= cap + TOL * np.maximum(1, cap))
    # the expanded schedule is a feasible operation of the representative days
    rep_ts = series(
        {r: agg.expanded()[:, to_period_matrix(days14).columns_of(f"demand_r{r}")].ravel() for r in (2, 4, 5)},
        {r: agg.expanded()[:, to_period_matrix(days14).columns_of(f"wind_r{r}")].ravel() for r in (2, 5, 6)},
    )
    worst = constraint_residuals(rep_ts, res.design, res.schedule, six_bus)
    assert all(v <= TOL for v in worst.values()), worst
    assert system_cost(res.design, res.schedule, six_bus) == pytest.approx(res.objective, rel=1e-6)


def test_inter_period_decay():
    assert (1 - 1e-5) ** 24 == pytest.approx(0.99976, abs=5e-6)


def test_unordered_with_storage_rejected(days14, six_bus):
    agg = identity_aggregation(to_period_matrix(days14), ordered=False)
    with pytest.raises(ConfigError):
        solve_planning_aggregated(agg, six_bus)


def test_weighted_lp_variable_for_variable():
    cfg, _, agg = chain_instance()
    res = solve_planning_aggregated(agg, cfg)
    demand, wind, w = weighted_inputs(agg, cfg)
    obj, _, sol = dense_planning_lp(demand, wind, cfg, weights=w)
    assert res.objective == pytest.approx(obj, rel=1e-9)
    rep = res.extras["representative_schedule"]
    for u, unit in enumerate(cfg.gen_units):
        assert res.design.cap_gen[unit] == pytest.approx(sol[("capg", unit)], rel=1e-7, abs=1e-7)
        oracle = np.array([sol[("g", unit, k)] for k in range(72)])
        np.testing.assert_allclose(rep.gen[u], oracle, rtol=1e-7, atol=1e-6)
    net = np.array([sol[("f", 1, 2, k)] - sol[("f", 2, 1, k)] for k in range(72)])
    np.testing.assert_allclose(rep.flow[0], net, rtol=1e-7, atol=1e-6)


def test_weighted_solution_optimal_in_oracle(days14, six_bus):
    from aposteriori.aggregation import aggregate_a_priori
    cfg = _no_storage(six_bus)
    agg = aggregate_a_priori(to_period_matrix(days14), 5, "medoid", ordered=False)
    res = solve_planning_aggregated(agg, cfg)
    demand, wind, w = weighted_inputs(agg, cfg)
    obj, _, _ = dense_planning_lp(demand, wind, cfg, weights=w, dense=False)
    worst, value = oracle_check(demand, wind, cfg, oracle_values(res.design, res.extras["representative_schedule"], cfg), w)
    assert worst <= 1e-7
    assert value == pytest.approx(obj, rel=1e-7)
