import numpy as np
import pytest

from conftest import random_instance, rel_close
from fssvm.data import Dataset
from fssvm.formulations import BoundsVector, BudgetSpec, Hyperparams
from fssvm.oracle import MAX_SUBSETS, OracleGuardError, count_subsets, enumerate_optimum, restricted_lp_value


def test_single_feature_two_subsets():
    d = Dataset("one", np.array([[1.0], [-1.0]]), np.array([1, -1]))
    res = enumerate_optimum(d, Hyperparams.of(1.0, 1))
    assert res.subsets_checked == 2
    assert res.subset == (0,)
    # w = 1, b = 0 separates both points at zero hinge loss
    assert res.objective == pytest.approx(1.0)


def test_count_subsets():
    assert count_subsets(1, 1) == 2
    assert count_subsets(5, 2) == 1 + 5 + 10
    assert count_subsets(3, 10) == 8


def test_zero_budget_is_empty_subset(toy):
    res = enumerate_optimum(toy, Hyperparams.of(1.0, 0))
    assert res.subset == () and res.subsets_checked == 1
    assert np.all(res.w == 0)
    # only b is free: the two hinge terms sum to at least 2
    assert res.objective == pytest.approx(2.0)


def test_guard_on_features():
    d = random_instance(np.random.default_rng(0), 5, 21)
    with pytest.raises(OracleGuardError):
        enumerate_optimum(d, Hyperparams.of(1.0, 1))


def test_guard_on_subset_count():
    d = random_instance(np.random.default_rng(0), 5, 20)
    assert count_subsets(20, 10) > MAX_SUBSETS
    with pytest.raises(OracleGuardError):
        enumerate_optimum(d, Hyperparams.of(1.0, 10))


def test_backends_agree():
    rng = np.random.default_rng(3)
    d = random_instance(rng, 9, 4)
    h = Hyperparams.of(4.0, 2)
    a = enumerate_optimum(d, h, backend="highs")
    b = enumerate_optimum(d, h, backend="simplex")
    assert rel_close(a.objective, b.objective)
    assert a.subsets_checked == b.subsets_checked == 11


def test_more_budget_never_hurts():
    rng = np.random.default_rng(11)
    d = random_instance(rng, 12, 5)
    values = [enumerate_optimum(d, Hyperparams.of(1.0, B)).objective for B in range(6)]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_general_costs_respected():
    rng = np.random.default_rng(5)
    d = random_instance(rng, 10, 4)
    costs = np.array([1.0, 2.0, 0.5, 3.0])
    h = Hyperparams(1.0, BudgetSpec(2.0, costs))
    res = enumerate_optimum(d, h)
    assert costs[list(res.subset)].sum() <= 2.0 + 1e-9
    # {} {0} {1} {2} {0,2}: cost 3.0 alone is unaffordable
    assert res.subsets_checked == 5


def test_restricted_value_matches_reported_subset():
    rng = np.random.default_rng(8)
    d = random_instance(rng, 10, 5)
    h = Hyperparams.of(4.0, 2)
    res = enumerate_optimum(d, h)
    sol, _ = restricted_lp_value(d, h, BoundsVector.default(5), res.subset, "highs")
    assert rel_close(sol.objective, res.objective)
