import csv

import numpy as np
import pytest

from conftest import random_instance, rel_close
from fssvm.data import Dataset
from fssvm.exact import (HISTORY_COLUMNS, ExactConfig, ExactState, run_exact, update_variant1, update_variant2,
                         update_variant3)
from fssvm.formulations import BoundsVector, Classifier, Hyperparams, build_sr_fs_svm, full_layout
from fssvm.kernel_search import KsConfig, RankingVector
from fssvm.milp import solve_milp
from fssvm.oracle import enumerate_optimum


def _state(K, n: int, r=None) -> ExactState:
    r = np.arange(n, dtype=float) if r is None else np.asarray(r, dtype=float)
    return ExactState(list(K), 0.0, 1.0, Classifier(np.zeros(n), 0.0, (), 1.0), BoundsVector.default(n),
                      RankingVector(r))


def test_variant1_single_bucket():
    s = _state([0, 1], 5)
    update_variant1(s, s.ranking, 3)
    assert s.K == [0, 1, 2, 3, 4] and not s.exhausted
    update_variant1(s, s.ranking, 3)
    assert s.exhausted


def test_variant1_order_and_growth():
    r = [0.0, 5.0, -1.0, 3.0, -2.0, 4.0, 1.0]
    s = _state([0], 7, r)
    update_variant1(s, s.ranking, 2)
    assert s.K == [0, 2, 4]
    update_variant1(s, s.ranking, 2)
    assert s.K == [0, 2, 3, 4, 6]
    assert len(s.K) == 1 + 2 * 2


def test_variant2_adds_positive_selectors():
    vmap = full_layout(4, 2)
    x = np.zeros(vmap.num_vars)
    x[vmap.v[[1, 2, 3]]] = [0.3, 0.0, 0.7]
    s = _state([0], 4)
    update_variant2(s, x, vmap)
    assert s.K == [0, 1, 3] and not s.exhausted


def test_variant2_all_zero_is_exhausted():
    vmap = full_layout(3, 2)
    s = _state([0], 3)
    update_variant2(s, np.zeros(vmap.num_vars), vmap)
    assert s.K == [0] and s.exhausted


@pytest.mark.parametrize("seed", range(4))
def test_growing_binary_set_never_loosens(seed):
    rng = np.random.default_rng(300 + seed)
    d = random_instance(rng, 12, 6)
    h = Hyperparams.of(1.0, 2)
    bounds = BoundsVector.default(6)
    values = []
    for K in ([0], [0, 1, 2], [0, 1, 2, 3, 4], list(range(6))):
        model, _ = build_sr_fs_svm(d, h, bounds, K)
        values.append(solve_milp(model).objective)
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    assert rel_close(values[-1], enumerate_optimum(d, h).objective)


def _variant3_setup(seed: int = 5):
    rng = np.random.default_rng(seed)
    d = random_instance(rng, 12, 6)
    h = Hyperparams.of(1.0, 2)
    bounds = BoundsVector.default(6)
    s = _state([0, 1, 2], 6)
    model, _ = build_sr_fs_svm(d, h, bounds, s.K)
    s.last_sr = solve_milp(model).incumbent
    return d, h, bounds, s


def test_variant3_keeps_recently_selected():
    d, h, bounds, s = _variant3_setup()
    s.it = 3
    s.last_selected = {0: 3, 1: 2, 2: 3}
    update_variant3(s, d, h, bounds, n_bar=10)
    # n_bar covers the whole outside set, and nothing was idle for two iterations
    assert s.K == [0, 1, 2, 3, 4, 5]


def test_variant3_removes_idle_features():
    d, h, bounds, s = _variant3_setup()
    s.it = 4
    s.last_selected = {0: 4, 1: 2, 2: 1}
    update_variant3(s, d, h, bounds, n_bar=1)
    assert 1 not in s.K and 2 not in s.K and 0 in s.K
    assert len(s.K) == 2
    added = [j for j in s.K if j != 0]
    assert s.last_selected[added[0]] == 4


def test_full_kernel_closes_in_one_iteration():
    rng = np.random.default_rng(12)
    d = random_instance(rng, 12, 5)
    h = Hyperparams.of(4.0, 2)
    clf, state = run_exact(d, h, ExactConfig(ks=KsConfig(kernel_size_override=5)))
    assert state.K == [0, 1, 2, 3, 4]
    assert state.it <= 1 and state.gap_percent <= 0.01
    assert rel_close(clf.objective, enumerate_optimum(d, h).objective)


def test_integral_relaxation_needs_no_loop():
    # the LP optimum uses one feature with a selector at 1, so LB = UB before any iteration
    d = Dataset("sep", np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([1, -1]))
    h = Hyperparams.of(1.0, 1)
    clf, state = run_exact(d, h, defaults=BoundsVector.default(2, 1.0))
    assert state.it == 0 and state.termination == "gap-closed"
    assert clf.objective == pytest.approx(1.0)


@pytest.mark.parametrize("variant,extra", [(1, {"S": 2}), (2, {}), (3, {"n_bar": 2})])
def test_sandwich_every_iteration(instances, variant, extra):
    for d, h in instances[:8]:
        opt = enumerate_optimum(d, h).objective
        tol = 1e-6 * max(1.0, opt)
        clf, state = run_exact(d, h, ExactConfig(variant=variant, ks=KsConfig(kernel_size_override=1), **extra))
        lbs = [row["LB"] for row in state.history]
        assert all(b >= a - 1e-12 for a, b in zip(lbs, lbs[1:]))
        for row in state.history:
            assert row["LB"] <= opt + tol <= row["UB"] + 2 * tol
        assert clf.objective >= opt - tol
        if state.gap_percent <= 0.01:
            assert clf.objective <= opt * (1 + 1e-4) + tol


def test_starred_mode_matches(instances):
    d, h = instances[6]
    plain, _ = run_exact(d, h, ExactConfig(variant=1, S=1, ks=KsConfig(kernel_size_override=1)))
    starred, st = run_exact(d, h, ExactConfig(variant=1, S=1, starred=True, ks=KsConfig(kernel_size_override=1)))
    assert rel_close(plain.objective, starred.objective)
    assert st.gap_percent <= 0.01


def test_history_csv(tmp_path, instances):
    d, h = instances[0]
    _, state = run_exact(d, h, ExactConfig(variant=2, ks=KsConfig(kernel_size_override=1)))
    path = tmp_path / "history.csv"
    state.write_history(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == HISTORY_COLUMNS
    assert len(rows) == len(state.history) == state.it + 1
    assert int(rows[0]["iteration"]) == 0


def test_iteration_limit(instances):
    d, h = instances[9]
    _, state = run_exact(d, h, ExactConfig(variant=1, S=1, max_iterations=1, ks=KsConfig(kernel_size_override=1)))
    assert state.it <= 1
    assert state.termination in ("gap-closed", "iteration-limit")


def test_config_validation():
    with pytest.raises(ValueError):
        ExactConfig(variant=4)
    with pytest.raises(ValueError):
        ExactConfig(S=0)
    assert ExactConfig(variant="III").variant == 3
