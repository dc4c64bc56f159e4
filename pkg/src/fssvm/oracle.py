"""Brute-force FS-SVM optimum by enumerating every affordable feature subset."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .data import Dataset
from .formulations import BoundsVector, Hyperparams, build_fs_svm_restricted
from .lp import solve_lp

MAX_FEATURES = 20
MAX_SUBSETS = 200_000


class OracleGuardError(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    objective: float
    subset: tuple[int, ...]
    w: np.ndarray
    b: float
    subsets_checked: int


def count_subsets(n: int, max_size: int) -> int:
    return sum(comb(n, s) for s in range(min(max_size, n) + 1))


def _affordable(h: Hyperparams, n: int):
    if h.budget.costs is None:
        cap = min(h.budget.max_features(), n)
        for size in range(cap + 1):
            yield from itertools.combinations(range(n), size)
        return
    for size in range(n + 1):
        for combo in itertools.combinations(range(n), size):
            if sum(h.budget.cost(j) for j in combo) <= h.budget.B + 1e-9:
                yield combo


def restricted_lp_value(d: Dataset, h: Hyperparams, bounds: BoundsVector, subset, backend: str | None = None):
    """Optimum of FS-SVM with selectors fixed to one on ``subset`` and every other feature removed."""
    model, vmap = build_fs_svm_restricted(d, h, bounds, subset)
    lb = model.lb.copy()
    for j in subset:
        lb[vmap.v[j]] = 1.0
    # the budget row is left in place; the subset is affordable so it never binds wrongly
    sol = solve_lp(model.relaxed().with_bounds(lb=lb), backend=backend)
    return sol, vmap


def enumerate_optimum(d: Dataset, h: Hyperparams, bounds: BoundsVector | None = None,
                      backend: str | None = "highs") -> OracleResult:
    n = d.n
    bounds = bounds or BoundsVector.default(n)
    if n > MAX_FEATURES:
        raise OracleGuardError(f"oracle refuses n={n} > {MAX_FEATURES} features")
    size_cap = n if h.budget.costs is not None else h.budget.max_features()
    total = count_subsets(n, size_cap)
    if total > MAX_SUBSETS:
        raise OracleGuardError(f"oracle refuses {total} subsets > {MAX_SUBSETS}")
    best: OracleResult | None = None
    checked = 0
    for subset in _affordable(h, n):
        checked += 1
        sol, vmap = restricted_lp_value(d, h, bounds, subset, backend)
        if not sol.optimal:
            continue
        if best is None or sol.objective < best.objective - 1e-12:
            best = OracleResult(sol.objective, subset, vmap.weights(sol.primal), float(sol.primal[vmap.b]), 0)
    assert best is not None, "the empty subset is always feasible"
    return OracleResult(best.objective, best.subset, best.w, best.b, checked)
