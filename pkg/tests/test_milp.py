import logging

import numpy as np
import pytest

from conftest import random_instance, rel_close
from fssvm.formulations import BoundsVector, BudgetSpec, Hyperparams, build_fs_svm, full_solution_vector
from fssvm.lp import GE, LE, ModelBuilder, solve_lp
from fssvm.milp import BnbConfig, make_rounding_heuristic, round_heuristic, solve_milp
from fssvm.oracle import enumerate_optimum


def test_no_binaries_is_one_lp():
    mb = ModelBuilder()
    x = mb.add_var("x", 0, 10, 1.0)
    mb.add_row({x: 1.0}, GE, 2.5)
    res = solve_milp(mb.build())
    assert res.status == "optimal" and res.nodes == 1
    assert res.objective == pytest.approx(2.5) and res.gap_percent == 0.0


def test_knapsack_by_hand():
    # max 5a + 4b + 3c s.t. 2a + 3b + c <= 4 -> a = c = 1, value 8
    mb = ModelBuilder()
    a, b, c = (mb.add_var(n, 0, 1, -v, binary=True) for n, v in (("a", 5), ("b", 4), ("c", 3)))
    mb.add_row({a: 2, b: 3, c: 1}, LE, 4)
    res = solve_milp(mb.build())
    assert res.objective == pytest.approx(-8.0)
    assert res.incumbent[[a, b, c]].tolist() == [1.0, 0.0, 1.0]


def test_infeasible():
    mb = ModelBuilder()
    a = mb.add_var("a", 0, 1, 1.0, binary=True)
    b = mb.add_var("b", 0, 1, 1.0, binary=True)
    mb.add_row({a: 1, b: 1}, GE, 1.5)
    mb.add_row({a: 1, b: 1}, LE, 1.2)
    assert solve_milp(mb.build()).status == "infeasible"
    # integer infeasible although the relaxation is feasible
    mb = ModelBuilder()
    a = mb.add_var("a", 0, 1, 1.0, binary=True)
    mb.add_row({a: 2}, GE, 0.5)
    mb.add_row({a: 2}, LE, 1.5)
    res = solve_milp(mb.build())
    assert res.status == "infeasible" and not res.has_solution


def test_config_validation():
    with pytest.raises(ValueError):
        BnbConfig(time_limit=0)
    with pytest.raises(ValueError):
        BnbConfig(rel_gap_target=1.0)


@pytest.mark.parametrize("seed", range(10))
def test_matches_oracle_10x5(seed):
    rng = np.random.default_rng(600 + seed)
    d = random_instance(rng, 10, 5)
    h = Hyperparams.of(float(rng.choice([1, 4])), 2)
    model, vmap = build_fs_svm(d, h, BoundsVector.default(5))
    res = solve_milp(model, BnbConfig(heuristic=make_rounding_heuristic(h.budget, vmap)))
    assert res.status == "optimal"
    assert rel_close(res.objective, enumerate_optimum(d, h).objective)
    binaries = res.incumbent[model.binaries]
    assert np.all(binaries == np.round(binaries))
    assert res.best_bound <= res.objective + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_warm_start_with_optimum(seed):
    rng = np.random.default_rng(700 + seed)
    d = random_instance(rng, 12, 6)
    h = Hyperparams.of(1.0, 2)
    model, vmap = build_fs_svm(d, h, BoundsVector.default(6))
    cold = solve_milp(model)
    warm = solve_milp(model, BnbConfig(incumbent=cold.incumbent))
    assert warm.status == "optimal" and warm.gap_percent == 0.0
    assert warm.objective == pytest.approx(cold.objective)
    assert warm.nodes <= cold.nodes


def test_infeasible_incumbent_rejected():
    d = random_instance(np.random.default_rng(1), 8, 4)
    model, _ = build_fs_svm(d, Hyperparams.of(1.0, 1), BoundsVector.default(4))
    with pytest.raises(ValueError, match="infeasible"):
        solve_milp(model, BnbConfig(incumbent=np.zeros(model.num_vars)))
    with pytest.raises(ValueError):
        solve_milp(model, BnbConfig(incumbent=np.zeros(3)))


def test_node_limit_reports_feasible_with_valid_bound():
    d = random_instance(np.random.default_rng(3), 15, 8)
    h = Hyperparams.of(4.0, 3)
    model, vmap = build_fs_svm(d, h, BoundsVector.default(8))
    full = solve_milp(model)
    res = solve_milp(model, BnbConfig(node_limit=2, heuristic=make_rounding_heuristic(h.budget, vmap)))
    assert res.status in ("feasible-time-limit", "optimal")
    assert res.best_bound <= full.objective + 1e-7 <= res.objective + 2e-7
    if res.status == "feasible-time-limit":
        assert res.gap_percent > 0


def test_no_incumbent_at_limit_is_time_limit():
    d = random_instance(np.random.default_rng(3), 15, 8)
    model, _ = build_fs_svm(d, Hyperparams.of(4.0, 3), BoundsVector.default(8))
    res = solve_milp(model, BnbConfig(node_limit=1))
    assert res.status == "time-limit" and not res.has_solution
    assert res.gap_percent == float("inf")


def test_bound_trace_monotone_and_deterministic(instances):
    for d, h in instances[:10]:
        model, _ = build_fs_svm(d, h, BoundsVector.default(d.n))
        a, b = solve_milp(model), solve_milp(model)
        assert all(y >= x - 1e-12 for x, y in zip(a.bound_trace, a.bound_trace[1:]))
        assert a.nodes == b.nodes and np.array_equal(a.incumbent, b.incumbent)


def test_trace_logging(caplog):
    d = random_instance(np.random.default_rng(3), 12, 6)
    model, _ = build_fs_svm(d, Hyperparams.of(4.0, 2), BoundsVector.default(6))
    with caplog.at_level(logging.DEBUG, logger="fssvm.milp"):
        res = solve_milp(model, BnbConfig(trace=True))
    if res.nodes > 1:
        assert any("depth=" in r.message for r in caplog.records)


def test_round_heuristic_cases(toy):
    h = Hyperparams.of(1.0, 1)
    model, vmap = build_fs_svm(toy, h, BoundsVector.default(2))
    relax = solve_lp(model)
    x = round_heuristic(model, relax, h.budget, vmap)
    assert x is not None and model.is_feasible(x)
    # an integral relaxation comes back unchanged
    lb, ub = model.lb.copy(), model.ub.copy()
    lb[vmap.v[0]] = ub[vmap.v[0]] = 1.0
    lb[vmap.v[1]] = ub[vmap.v[1]] = 0.0
    fixed = model.with_bounds(lb, ub)
    sol = solve_lp(fixed)
    assert np.array_equal(round_heuristic(fixed, sol, h.budget, vmap), sol.primal)
    # all selectors zero in the relaxation: every v fixed to 0, only b and xi move
    tiny = Hyperparams.of(1e-9, 1)
    model, vmap = build_fs_svm(toy, tiny, BoundsVector.default(2))
    relax = solve_lp(model)
    x = round_heuristic(model, relax, tiny.budget, vmap)
    assert np.all(x[vmap.v] == 0) and np.all(x[vmap.w_plus] == 0)


def test_round_heuristic_never_beats_optimum(instances):
    for d, h in instances:
        model, vmap = build_fs_svm(d, h, BoundsVector.default(d.n))
        x = round_heuristic(model, solve_lp(model), h.budget, vmap)
        if x is not None:
            assert model.is_feasible(x)
            assert model.objective_value(x) >= enumerate_optimum(d, h).objective - 1e-7


def test_round_heuristic_respects_general_costs():
    d = random_instance(np.random.default_rng(4), 12, 4)
    budget = BudgetSpec(2.0, np.array([2.0, 1.0, 1.0, 1.0]))
    h = Hyperparams(1.0, budget)
    model, vmap = build_fs_svm(d, h, BoundsVector.default(4, 10.0))
    x = round_heuristic(model, solve_lp(model), budget, vmap)
    assert x is None or budget.costs @ x[vmap.v] <= 2.0 + 1e-9


def test_full_solution_vector_roundtrip(instances):
    d, h = instances[0]
    model, vmap = build_fs_svm(d, h, BoundsVector.default(d.n))
    res = solve_milp(model)
    from fssvm.formulations import extract_classifier
    clf = extract_classifier(vmap, res.incumbent, res.objective)
    x = full_solution_vector(vmap, clf, d)
    assert model.is_feasible(x)
    assert model.objective_value(x) == pytest.approx(res.objective, rel=1e-7)
