"""Best-first branch-and-bound over the binary variables of a MilpModel."""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .formulations import BudgetSpec, VariableMap
from .lp import LE, TOL_INT, Basis, LpSolution, MilpModel, solve_lp

log = logging.getLogger(__name__)

Heuristic = Callable[[MilpModel, LpSolution], "np.ndarray | None"]

INCUMBENT_TOL = 1e-6
ABS_GAP_TOL = 1e-9


@dataclass
class BnbConfig:
    time_limit: float = 7200.0
    rel_gap_target: float = 1e-6
    node_limit: int | None = None
    incumbent: np.ndarray | None = None
    heuristic: Heuristic | None = None
    backend: str | None = None
    trace: bool = False

    def __post_init__(self) -> None:
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if not 0 <= self.rel_gap_target < 1:
            raise ValueError("rel_gap_target must lie in [0, 1)")


@dataclass
class BnbResult:
    """``status`` is optimal, feasible-time-limit, time-limit (no incumbent found) or infeasible."""

    status: str
    incumbent: np.ndarray | None
    objective: float
    best_bound: float
    nodes: int
    wall_time: float
    root: LpSolution | None = None
    bound_trace: list[float] = field(default_factory=list)

    @property
    def gap_percent(self) -> float:
        if self.incumbent is None or not np.isfinite(self.best_bound):
            return float("inf") if self.incumbent is None else 100.0
        diff = max(0.0, self.objective - self.best_bound)
        if diff <= ABS_GAP_TOL:
            return 0.0
        return 100.0 * diff / max(abs(self.objective), ABS_GAP_TOL)

    @property
    def has_solution(self) -> bool:
        return self.incumbent is not None


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    sol: LpSolution = field(compare=False)
    depth: int = field(compare=False, default=0)


def _fractional(model: MilpModel, x: np.ndarray) -> int | None:
    """Most fractional binary (ties: lowest index), or None when integral within TOL_INT."""
    idx = model.binaries
    if idx.size == 0:
        return None
    frac = np.abs(x[idx] - np.round(x[idx]))
    k = int(np.argmax(frac))
    return int(idx[k]) if frac[k] > TOL_INT else None


def _binary_rows(model: MilpModel) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """<= rows whose support is binaries only (the budget row in FS-SVM models)."""
    rows = []
    for i in range(model.num_rows):
        if model.sense[i] != LE:
            continue
        nz = np.flatnonzero(model.A[i])
        if nz.size and model.binary[nz].all():
            rows.append((nz, model.A[i, nz], float(model.rhs[i])))
    return rows


def _row_infeasible(rows, lb: np.ndarray, ub: np.ndarray) -> bool:
    for nz, a, rhs in rows:
        low = np.where(a > 0, lb[nz], ub[nz]) @ a
        if low > rhs + 1e-9:
            return True
    return False


class _Search:
    def __init__(self, model: MilpModel, cfg: BnbConfig):
        self.model = model
        self.cfg = cfg
        self.t0 = time.perf_counter()
        self.best_x: np.ndarray | None = None
        self.best_obj = np.inf
        self.nodes = 0
        self.seq = itertools.count()
        self.rows = _binary_rows(model)

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def remaining(self) -> float:
        return max(self.cfg.time_limit - self.elapsed(), 1e-3)

    def cutoff(self) -> float:
        if not np.isfinite(self.best_obj):
            return np.inf
        return self.best_obj - max(ABS_GAP_TOL, self.cfg.rel_gap_target * abs(self.best_obj))

    def offer(self, x: np.ndarray, source: str) -> bool:
        obj = self.model.objective_value(x)
        if obj < self.best_obj - 1e-12 and self.model.is_feasible(x, INCUMBENT_TOL):
            self.best_x, self.best_obj = np.array(x, dtype=float), obj
            log.debug("incumbent %.9g from %s at node %d", obj, source, self.nodes)
            return True
        return False

    def solve_node(self, lb: np.ndarray, ub: np.ndarray, warm: Basis | None) -> LpSolution:
        self.nodes += 1
        return solve_lp(self.model.with_bounds(lb, ub), time_limit=self.remaining(),
                        warm_start=warm, backend=self.cfg.backend)

    def polish(self, sol: LpSolution, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
        """Snap near-integral binaries to 0/1 and re-solve so the incumbent is exactly integral."""
        idx = self.model.binaries
        x = sol.primal
        if idx.size == 0 or np.all(x[idx] == np.round(x[idx])):
            return x
        lb, ub = lb.copy(), ub.copy()
        lb[idx] = ub[idx] = np.round(x[idx])
        fixed = solve_lp(self.model.with_bounds(lb, ub), time_limit=self.remaining(),
                         warm_start=sol.basis, backend=self.cfg.backend)
        if fixed.optimal and fixed.objective <= sol.objective + 1e-7 * max(1.0, abs(sol.objective)):
            return fixed.primal
        return x


def solve_milp(model: MilpModel, cfg: BnbConfig | None = None) -> BnbResult:
    cfg = cfg or BnbConfig()
    s = _Search(model, cfg)
    if cfg.incumbent is not None:
        inc = np.asarray(cfg.incumbent, dtype=float)
        if inc.shape != (model.num_vars,):
            raise ValueError(f"incumbent has {inc.shape[0]} entries, model has {model.num_vars} variables")
        viol = model.violation(inc)
        if viol > INCUMBENT_TOL:
            raise ValueError(f"warm-start incumbent is infeasible (max violation {viol:.3g})")
        s.best_x, s.best_obj = inc.copy(), model.objective_value(inc)

    def finish(status: str, bound: float, root: LpSolution | None, trace: list[float]) -> BnbResult:
        if status == "optimal":
            bound = min(bound, s.best_obj)
        return BnbResult(status, s.best_x, float(s.best_obj), float(bound), s.nodes, s.elapsed(), root, trace)

    lb0, ub0 = model.lb.copy(), model.ub.copy()
    if _row_infeasible(s.rows, lb0, ub0):
        return finish("infeasible", np.inf, None, [])
    root = s.solve_node(lb0, ub0, None)
    if root.status == "infeasible":
        return finish("infeasible", np.inf, root, [])
    if not root.optimal:
        status = "feasible-time-limit" if s.best_x is not None else "time-limit"
        if root.status != "time-limit":
            log.warning("root relaxation ended with status %s", root.status)
        return finish(status, -np.inf, root, [])

    trace = [root.objective]
    if _fractional(model, root.primal) is None:
        s.offer(s.polish(root, lb0, ub0), "root")
    elif cfg.heuristic is not None:
        x = cfg.heuristic(model, root)
        if x is not None:
            s.offer(x, "heuristic")

    heap: list[_Node] = []
    # smallest bound of any leaf closed by the cutoff; with the incumbent it bounds every closed subtree
    floor = np.inf
    if _fractional(model, root.primal) is not None:
        if root.objective < s.cutoff():
            heapq.heappush(heap, _Node(root.objective, next(s.seq), lb0, ub0, root))
        else:
            floor = root.objective
    bound = root.objective
    timed_out = False

    while heap:
        if s.elapsed() >= cfg.time_limit or (cfg.node_limit is not None and s.nodes >= cfg.node_limit):
            timed_out = True
            break
        node = heapq.heappop(heap)
        bound = max(bound, node.bound)
        trace.append(bound)
        if node.bound >= s.cutoff():
            heapq.heappush(heap, node)
            floor = min(floor, min(n.bound for n in heap))
            heap.clear()
            break
        j = _fractional(model, node.sol.primal)
        if cfg.trace:
            log.debug("node depth=%d bound=%.9g incumbent=%.9g branch=%s", node.depth, node.bound,
                      s.best_obj, j)
        for value in (0.0, 1.0):
            lb, ub = node.lb.copy(), node.ub.copy()
            lb[j] = ub[j] = value
            if _row_infeasible(s.rows, lb, ub):
                continue
            sol = s.solve_node(lb, ub, node.sol.basis)
            if sol.status == "time-limit":
                timed_out = True
                continue
            if not sol.optimal:
                if sol.status != "infeasible":
                    log.warning("node LP ended with status %s; node dropped", sol.status)
                continue
            child_bound = max(sol.objective, node.bound)
            if child_bound >= s.cutoff():
                floor = min(floor, child_bound)
                continue
            if _fractional(model, sol.primal) is None:
                floor = min(floor, child_bound)
                s.offer(s.polish(sol, lb, ub), "node")
            else:
                heapq.heappush(heap, _Node(child_bound, next(s.seq), lb, ub, sol, node.depth + 1))
        if timed_out:
            heapq.heappush(heap, node)  # its unexplored child still needs the parent's bound
            break

    if s.best_x is None:
        if timed_out:
            return finish("time-limit", bound, root, trace)
        return finish("infeasible", np.inf, root, trace)
    open_bound = min([n.bound for n in heap], default=np.inf)
    bound = min(open_bound, floor, s.best_obj)
    gap_ok = s.best_obj - bound <= max(ABS_GAP_TOL, cfg.rel_gap_target * abs(s.best_obj))
    if timed_out and not gap_ok:
        return finish("feasible-time-limit", bound, root, trace)
    return finish("optimal", bound, root, trace)


def round_heuristic(model: MilpModel, relaxation: LpSolution, budget: BudgetSpec,
                    vmap: VariableMap, backend: str | None = None) -> np.ndarray | None:
    """Keep the largest selectors that fit the budget, fix every binary selector, re-solve."""
    if not relaxation.optimal:
        return None
    x = relaxation.primal
    feats = [int(j) for j in vmap.features if model.binary[vmap.v[j]]]
    vals = {j: float(x[vmap.v[j]]) for j in feats}
    if all(abs(v - round(v)) <= TOL_INT for v in vals.values()):
        return x.copy()
    order = sorted((j for j in feats if vals[j] > TOL_INT), key=lambda j: (-vals[j], j))
    chosen, spent = set(), 0.0
    for j in order:
        c = budget.cost(j)
        if spent + c <= budget.B + 1e-9:
            chosen.add(j)
            spent += c
    lb, ub = model.lb.copy(), model.ub.copy()
    for j in feats:
        lb[vmap.v[j]] = ub[vmap.v[j]] = 1.0 if j in chosen else 0.0
    sol = solve_lp(model.with_bounds(lb, ub), backend=backend)
    return sol.primal if sol.optimal else None


def make_rounding_heuristic(budget: BudgetSpec, vmap: VariableMap,
                            backend: str | None = None) -> Heuristic:
    return lambda model, relaxation: round_heuristic(model, relaxation, budget, vmap, backend)
