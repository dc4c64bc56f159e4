"""One-call training routines returning a Classifier for each model family."""

from __future__ import annotations

import time
from typing import Iterable

import numpy as np

from .data import Dataset
from .formulations import (BoundsVector, BudgetSpec, Classifier, Hyperparams, VariableMap, build_fs_svm,
                           build_fs_svm_restricted, build_l1_svm, build_milp1, extract_classifier)
from .lp import MilpModel, solve_lp
from .milp import BnbConfig, BnbResult, make_rounding_heuristic, solve_milp


class SolveError(RuntimeError):
    pass


def _stats(res: BnbResult) -> dict:
    return {"status": res.status, "gap_percent": res.gap_percent, "nodes": res.nodes,
            "wall_time": res.wall_time, "best_bound": res.best_bound}


def solve_model(model: MilpModel, vmap: VariableMap, budget: BudgetSpec | None, time_limit: float,
                incumbent: np.ndarray | None = None, backend: str | None = None) -> tuple[Classifier, BnbResult]:
    heuristic = make_rounding_heuristic(budget, vmap, backend) if budget is not None and vmap.v.size else None
    res = solve_milp(model, BnbConfig(time_limit=time_limit, incumbent=incumbent, heuristic=heuristic,
                                      backend=backend))
    if not res.has_solution:
        raise SolveError(f"{vmap.kind}: no feasible solution ({res.status})")
    return extract_classifier(vmap, res.incumbent, res.objective, **_stats(res)), res


def solve_fs_svm(d: Dataset, h: Hyperparams, bounds: BoundsVector | None = None, time_limit: float = 7200.0,
                 incumbent: np.ndarray | None = None, backend: str | None = None) -> tuple[Classifier, BnbResult]:
    bounds = bounds or BoundsVector.default(d.n)
    model, vmap = build_fs_svm(d, h, bounds)
    return solve_model(model, vmap, h.budget, time_limit, incumbent, backend)


def solve_restricted(d: Dataset, h: Hyperparams, bounds: BoundsVector, K: Iterable[int],
                     time_limit: float = 7200.0, backend: str | None = None) -> tuple[Classifier, BnbResult]:
    model, vmap = build_fs_svm_restricted(d, h, bounds, K)
    return solve_model(model, vmap, h.budget, time_limit, None, backend)


def solve_l1_svm(d: Dataset, C: float, backend: str | None = None) -> Classifier:
    model, vmap = build_l1_svm(d, C)
    t0 = time.perf_counter()
    sol = solve_lp(model, backend=backend)
    if not sol.optimal:
        raise SolveError(f"l1-svm LP ended with status {sol.status}")
    return extract_classifier(vmap, sol, status="optimal", gap_percent=0.0, nodes=1,
                              wall_time=time.perf_counter() - t0)


def solve_milp1(d: Dataset, budget: BudgetSpec, bounds: BoundsVector | None = None, time_limit: float = 7200.0,
                backend: str | None = None) -> tuple[Classifier, BnbResult]:
    bounds = bounds or BoundsVector.default(d.n)
    model, vmap = build_milp1(d, bounds, budget)
    res = solve_milp(model, BnbConfig(time_limit=time_limit, backend=backend))
    if not res.has_solution:
        raise SolveError(f"milp1: no feasible solution ({res.status})")
    clf = extract_classifier(vmap, res.incumbent, res.objective, **_stats(res))
    clf.stats["zero_objective"] = bool(res.objective <= 1e-9)
    return clf, res
