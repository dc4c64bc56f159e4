"""Exact refinement: semi-relaxed FS-SVM solves over a growing binary set until UB and LB meet."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .formulations import (SELECT_TOL, BoundsVector, Classifier, Hyperparams, build_fs_svm, build_sr_fs_svm,
                           extract_classifier, full_layout, full_solution_vector, objective_coeffs)
from .kernel_search import KsConfig, RankingVector, rank_features, run_kernel_search
from .lp import GE, solve_lp
from .milp import BnbConfig, make_rounding_heuristic, solve_milp
from .tightening import solve_relaxation, tighten

log = logging.getLogger(__name__)

VARIANTS = {"1": 1, "I": 1, "2": 2, "II": 2, "3": 3, "III": 3}
HISTORY_COLUMNS = ("iteration", "z_LB", "z_UB", "LB", "UB", "kernel_size", "seconds")


@dataclass
class ExactConfig:
    variant: int = 1
    S: int = 20
    n_bar: int = 20
    starred: bool = False
    per_subproblem_time_limit: float = 1800.0
    gap_target_percent: float = 0.01
    stagnation_limit: int = 5
    max_iterations: int | None = None
    ks: KsConfig = field(default_factory=KsConfig)
    backend: str | None = None

    def __post_init__(self) -> None:
        if str(self.variant) not in VARIANTS:
            raise ValueError(f"variant must be 1, 2 or 3, got {self.variant!r}")
        self.variant = VARIANTS[str(self.variant)]
        if self.S < 1 or self.n_bar < 1:
            raise ValueError("S and n_bar must be at least 1")
        if not (self.per_subproblem_time_limit > 0 and self.stagnation_limit > 0):
            raise ValueError("limits must be positive")


@dataclass
class ExactState:
    K: list[int]
    LB: float
    UB: float
    best: Classifier
    bounds: BoundsVector
    ranking: RankingVector
    it: int = 0
    history: list[dict] = field(default_factory=list)
    buckets: list[list[int]] | None = None
    exhausted: bool = False
    last_sr: np.ndarray | None = None
    last_selected: dict[int, int] = field(default_factory=dict)
    termination: str = ""

    @property
    def gap_percent(self) -> float:
        return max(0.0, 100.0 * (self.UB - self.LB) / max(abs(self.UB), 1e-12))

    def write_history(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
            w.writeheader()
            w.writerows(self.history)


def update_variant1(state: ExactState, ranking: RankingVector, S: int) -> ExactState:
    """Add the next bucket of S outside features in ranking order; set ``exhausted`` when none remain."""
    if state.buckets is None:
        outside = ranking.order(set(range(ranking.r.size)) - set(state.K))
        state.buckets = [outside[i:i + S] for i in range(0, len(outside), S)]
    if not state.buckets:
        state.exhausted = True
        return state
    state.K = sorted(set(state.K) | set(state.buckets.pop(0)))
    return state


def update_variant2(state: ExactState, sr_solution: np.ndarray, vmap) -> ExactState:
    """Add every relaxed feature whose selector is positive in the semi-relaxed solution."""
    added = [j for j in range(vmap.n) if j not in state.K and sr_solution[vmap.v[j]] > SELECT_TOL]
    state.exhausted = not added
    state.K = sorted(set(state.K) | set(added))
    return state


def update_variant3(state: ExactState, d: Dataset, h: Hyperparams, bounds: BoundsVector, n_bar: int,
                    backend: str | None = None) -> ExactState:
    """Drop kernel features unselected in the last two iterations, add the n_bar best by reduced cost."""
    vmap = full_layout(d.n, d.m)
    K = set(state.K)
    removed = {j for j in K if state.it - state.last_selected.get(j, state.it) >= 2}
    model, _ = build_sr_fs_svm(d, h, bounds, state.K)
    lb, ub = model.lb.copy(), model.ub.copy()
    for j in state.K:
        lb[vmap.v[j]] = ub[vmap.v[j]] = round(float(state.last_sr[vmap.v[j]]))
    sol = solve_lp(model.relaxed().with_bounds(lb, ub), backend=backend)
    if not sol.optimal:
        log.warning("variant III ranking LP ended with status %s; kernel unchanged", sol.status)
        state.exhausted = True
        return state
    r_bar = rank_features(sol, vmap)
    added = r_bar.order(set(range(d.n)) - K)[:n_bar]
    for j in added:
        state.last_selected[j] = state.it
    new_K = sorted((K | set(added)) - removed)
    state.exhausted = new_K == state.K
    state.K = new_K
    return state


def _fixed_v_lp(d: Dataset, h: Hyperparams, bounds: BoundsVector, K: list[int], sr_x: np.ndarray,
                backend: str | None):
    model, vmap = build_fs_svm(d, h, bounds)
    lb, ub = model.lb.copy(), model.ub.copy()
    for j in range(d.n):
        val = round(float(sr_x[vmap.v[j]])) if j in K else 0.0
        lb[vmap.v[j]] = ub[vmap.v[j]] = val
    sol = solve_lp(model.relaxed().with_bounds(lb, ub), backend=backend)
    return sol, model, vmap


def run_exact(d: Dataset, h: Hyperparams, cfg: ExactConfig | None = None,
              defaults: BoundsVector | None = None) -> tuple[Classifier, ExactState]:
    cfg = cfg or ExactConfig()
    defaults = defaults or BoundsVector.default(d.n)
    t0 = time.perf_counter()
    rep = tighten(d, h, defaults, "12", milp_time_limit=cfg.ks.per_milp_time_limit, backend=cfg.backend)
    bounds, UB, LB, best = rep.bounds_after, rep.ub_used, rep.lp_lb, rep.incumbent
    ks_clf, ks_state = run_kernel_search(d, h, bounds, cfg.ks)
    if ks_clf.objective < UB - 1e-9 * max(1.0, abs(UB)):
        UB, best = ks_clf.objective, ks_clf
        rep = tighten(d, h, bounds, "12", upper_bound=UB, backend=cfg.backend)
        bounds, LB = rep.bounds_after, max(LB, rep.lp_lb)
    lp_sol, vmap = solve_relaxation(d, h, bounds, cfg.backend)
    K = list(ks_state.kernel)
    ranking = rank_features(lp_sol, vmap)
    if not K:
        K = sorted(ranking.order()[:max(1, h.budget.max_features())])
    state = ExactState(K, LB, UB, best, bounds, ranking)
    state.last_selected = {j: 0 for j in K}
    state.history.append({"iteration": 0, "z_LB": LB, "z_UB": UB, "LB": LB, "UB": UB, "kernel_size": len(K),
                          "seconds": time.perf_counter() - t0})
    full_model, _ = build_fs_svm(d, h, defaults)

    stagnant = 0
    while state.gap_percent > cfg.gap_target_percent:
        if cfg.max_iterations is not None and state.it >= cfg.max_iterations:
            state.termination = "iteration-limit"
            break
        state.it += 1
        model, smap = build_sr_fs_svm(d, h, bounds, state.K)
        incumbent = None
        if cfg.starred:
            model = model.add_constraint(objective_coeffs(smap, h.C), GE, state.LB, "lower_bound_cut")
            x = full_solution_vector(smap, state.best, d)
            if model.is_feasible(x, 1e-6):
                incumbent = x
            else:
                log.info("best classifier is not a valid warm start for SR(K); starting cold")
        res = solve_milp(model, BnbConfig(time_limit=cfg.per_subproblem_time_limit, incumbent=incumbent,
                                          heuristic=make_rounding_heuristic(h.budget, smap, cfg.backend),
                                          backend=cfg.backend))
        if not res.has_solution:
            state.termination = f"subproblem-{res.status}"
            if np.isfinite(res.best_bound):
                state.LB = max(state.LB, min(res.best_bound, state.UB))
            break
        z_lb = min(res.best_bound, res.objective)
        state.last_sr = res.incumbent
        for j in state.K:
            if res.incumbent[smap.v[j]] > 0.5:
                state.last_selected[j] = state.it

        fixed, _, fmap = _fixed_v_lp(d, h, bounds, state.K, res.incumbent, cfg.backend)
        z_ub = np.inf
        if fixed.optimal:
            z_ub = fixed.objective
            if z_ub < state.UB and full_model.is_feasible(fixed.primal, 1e-6):
                state.UB = z_ub
                state.best = extract_classifier(fmap, fixed.primal, z_ub)
        if z_lb > state.LB + 1e-9 * max(1.0, abs(state.LB)):
            state.LB = z_lb
            stagnant = 0
        else:
            stagnant += 1
        state.LB = min(state.LB, state.UB)
        state.history.append({"iteration": state.it, "z_LB": z_lb, "z_UB": z_ub, "LB": state.LB, "UB": state.UB,
                              "kernel_size": len(state.K), "seconds": time.perf_counter() - t0})
        log.info("exact it=%d z_LB=%.9g z_UB=%.9g gap=%.4f%% |K|=%d", state.it, z_lb, z_ub,
                 state.gap_percent, len(state.K))
        if res.status != "optimal" or res.wall_time > cfg.per_subproblem_time_limit:
            state.termination = "subproblem-time-limit"
            break
        if state.gap_percent <= cfg.gap_target_percent:
            break
        if stagnant >= cfg.stagnation_limit:
            state.termination = "stagnation"
            break
        if cfg.variant == 1:
            update_variant1(state, ranking, cfg.S)
        elif cfg.variant == 2:
            update_variant2(state, res.incumbent, smap)
        else:
            update_variant3(state, d, h, bounds, cfg.n_bar, cfg.backend)
        if state.exhausted:
            state.termination = "kernel-exhausted"
            break
    if state.gap_percent <= cfg.gap_target_percent:
        state.termination = "gap-closed"
    state.best.stats.update(LB=state.LB, UB=state.UB, gap_percent=state.gap_percent, iterations=state.it,
                            wall_time=time.perf_counter() - t0, termination=state.termination)
    return state.best, state
