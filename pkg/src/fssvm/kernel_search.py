"""Kernel Search: restricted FS-SVM solves over a kernel of promising features grown bucket by bucket."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .formulations import (SELECT_TOL, BoundsVector, Classifier, Hyperparams, VariableMap, build_fs_svm,
                           build_fs_svm_restricted, extract_classifier, objective_coeffs)
from .lp import GE, LE, LpSolution
from .milp import BnbConfig, make_rounding_heuristic, solve_milp
from .tightening import lp_weight_mass, solve_relaxation
from .train import solve_restricted

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankingVector:
    r: np.ndarray

    def order(self, among=None) -> list[int]:
        """Features sorted by non-decreasing r, ties to the lower index."""
        idx = np.arange(self.r.size) if among is None else np.array(sorted(among), dtype=int)
        if idx.size == 0:
            return []
        return [int(j) for j in idx[np.lexsort((idx, self.r[idx]))]]


def rank_features(lp_sol: LpSolution, vmap: VariableMap) -> RankingVector:
    """-(w+_j + w-_j) for features the solution uses, else the smaller reduced cost of w+_j, w-_j."""
    mass = lp_weight_mass(lp_sol, vmap)
    d = lp_sol.reduced_costs
    r = np.zeros(vmap.n)
    for j in range(vmap.n):
        if vmap.w_plus[j] < 0:
            r[j] = np.inf
        elif mass[j] > SELECT_TOL:
            r[j] = -mass[j]
        else:
            r[j] = min(d[vmap.w_plus[j]], d[vmap.w_minus[j]])
    return RankingVector(r)


@dataclass
class KsConfig:
    bucket_fraction: float = 0.1
    per_milp_time_limit: float = 900.0
    removal_window: float = 2
    kernel_size_override: int | None = None
    backend: str | None = None

    def __post_init__(self) -> None:
        if not 0 < self.bucket_fraction <= 1:
            raise ValueError("bucket_fraction must lie in (0, 1]")
        if not self.per_milp_time_limit > 0:
            raise ValueError("per_milp_time_limit must be positive")


@dataclass
class KsState:
    kernel: list[int]
    buckets: list[list[int]]
    k: int
    UB: float
    best: Classifier
    it: int = 0
    accepted: int = 0
    last_selected: dict[int, int] = field(default_factory=dict)
    trace: list[dict] = field(default_factory=list)
    nodes: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "buckets": self.buckets, "k": self.k, "UB": self.UB, "it": self.it,
                "accepted": self.accepted, "last_selected": {str(j): s for j, s in self.last_selected.items()},
                "trace": self.trace, "nodes": self.nodes, "wall_time": self.wall_time,
                "best": self.best.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _buckets(rest: list[int], size: int) -> list[list[int]]:
    return [rest[i:i + size] for i in range(0, len(rest), size)]


def run_kernel_search(d: Dataset, h: Hyperparams, bounds: BoundsVector | None = None,
                      cfg: KsConfig | None = None) -> tuple[Classifier, KsState]:
    cfg = cfg or KsConfig()
    bounds = bounds or BoundsVector.default(d.n)
    t0 = time.perf_counter()
    lp_sol, vmap = solve_relaxation(d, h, bounds, cfg.backend)
    ranking = rank_features(lp_sol, vmap)
    order = ranking.order()
    k = cfg.kernel_size_override or int(np.sum(lp_weight_mass(lp_sol, vmap) > SELECT_TOL))
    if k == 0:
        k = min(h.budget.max_features(), d.n)
    k = max(1, min(k, d.n))
    kernel = sorted(order[:k])
    buckets = _buckets(order[k:], k)
    n_explore = math.ceil(cfg.bucket_fraction * len(buckets))

    best, res = solve_restricted(d, h, bounds, kernel, cfg.per_milp_time_limit, cfg.backend)
    state = KsState(kernel, buckets, k, best.objective, best, nodes=res.nodes)
    state.last_selected = {j: 0 for j in kernel}
    full_model, full_map = build_fs_svm(d, h, bounds)
    log.info("kernel search: k=%d, %d buckets, exploring %d, UB=%.9g", k, len(buckets), n_explore, state.UB)

    for it in range(1, n_explore + 1):
        bucket = buckets[it - 1]
        state.it = it
        union = sorted(set(state.kernel) | set(bucket))
        model, rmap = build_fs_svm_restricted(d, h, bounds, union)
        model = model.add_constraint(objective_coeffs(rmap, h.C), LE, state.UB, "objective_cap")
        model = model.add_constraint({int(rmap.v[j]): 1.0 for j in bucket}, GE, 1.0, "bucket_entry")
        res = solve_milp(model, BnbConfig(time_limit=cfg.per_milp_time_limit,
                                          heuristic=make_rounding_heuristic(h.budget, rmap, cfg.backend),
                                          backend=cfg.backend))
        state.nodes += res.nodes
        accepted = False
        if res.has_solution:
            x_full = rmap.embed(res.incumbent, full_map)
            if full_model.is_feasible(x_full, 1e-6):
                accepted = True
            else:
                log.warning("iteration %d: incumbent fails the full-model check; skipped", it)
        if accepted:
            state.accepted += 1
            state.UB = res.objective
            state.best = extract_classifier(rmap, res.incumbent, res.objective, status=res.status,
                                            gap_percent=res.gap_percent, nodes=res.nodes)
            chosen = {j for j in union if res.incumbent[rmap.v[j]] > 0.5}
            for j in chosen:
                state.last_selected[j] = state.accepted
            added = [j for j in bucket if j in chosen]
            removed = [j for j in state.kernel
                       if j not in chosen and state.accepted - state.last_selected.get(j, 0) >= cfg.removal_window]
            state.kernel = sorted((set(state.kernel) | set(added)) - set(removed))
        state.trace.append({"iteration": it, "bucket": bucket, "feasible": accepted, "UB": state.UB,
                            "kernel_size": len(state.kernel)})
        log.info("ks it=%d bucket=%s feasible=%s UB=%.9g |K|=%d", it, bucket, accepted, state.UB, len(state.kernel))

    state.wall_time = time.perf_counter() - t0
    state.best.stats.update(nodes_total=state.nodes, wall_time=state.wall_time)
    return state.best, state
