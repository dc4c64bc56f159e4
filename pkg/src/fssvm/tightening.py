"""Big-M bound tightening: probing LPs under an objective cap, and the Lagrangian bound for idle features."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .formulations import (SELECT_TOL, BoundsVector, BudgetSpec, Classifier, Hyperparams, VariableMap,
                           build_lp_relaxation, build_probe_lp, full_layout)
from .lp import LpSolution, solve_lp
from .train import SolveError, solve_restricted

log = logging.getLogger(__name__)

DENOM_TOL = 1e-9


@dataclass
class TighteningReport:
    bounds_before: BoundsVector
    bounds_after: BoundsVector
    ub_used: float
    lp_lb: float
    time_strategy1: float = 0.0
    time_strategy2: float = 0.0
    incumbent: Classifier | None = None

    @property
    def delta_b_before(self) -> float:
        return self.bounds_before.delta_b

    @property
    def delta_b_after(self) -> float:
        return self.bounds_after.delta_b

    def to_dict(self) -> dict:
        return {"delta_b_before": self.delta_b_before, "delta_b_after": self.delta_b_after,
                "ub": self.ub_used, "lp_lb": self.lp_lb, "t_strategy1": self.time_strategy1,
                "t_strategy2": self.time_strategy2}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def solve_relaxation(d: Dataset, h: Hyperparams, bounds: BoundsVector,
                     backend: str | None = None) -> tuple[LpSolution, VariableMap]:
    model, vmap = build_lp_relaxation(d, h, bounds)
    sol = solve_lp(model, backend=backend)
    if not sol.optimal:
        raise SolveError(f"LP relaxation ended with status {sol.status}")
    return sol, vmap


def lp_weight_mass(sol: LpSolution, vmap: VariableMap) -> np.ndarray:
    """Per feature w+_j + w-_j in an FS-SVM-family solution."""
    x = sol.primal
    return np.array([x[vmap.w_plus[j]] + x[vmap.w_minus[j]] if vmap.w_plus[j] >= 0 else 0.0
                     for j in range(vmap.n)])


def dual_correlation(d: Dataset, sol: LpSolution, vmap: VariableMap, j0: int) -> float:
    """sum_i alpha_i y_i x_ij0 with alpha the margin-row multipliers."""
    alpha = sol.duals[vmap.margin_rows]
    return float(np.sum(alpha * d.y * d.x[:, j0]))


def strategy1(d: Dataset, h: Hyperparams, bounds: BoundsVector, upper_bound: float | None = None,
              milp_time_limit: float = 900.0,
              backend: str | None = None) -> tuple[BoundsVector, float, Classifier | None]:
    """Probe each weight's largest magnitude among solutions no worse than an upper bound.

    Without ``upper_bound`` the bound comes from the restricted problem over
    the features the LP relaxation uses.  All probes see the input bounds.
    """
    incumbent = None
    if upper_bound is None:
        sol, vmap = solve_relaxation(d, h, bounds, backend)
        K0 = np.flatnonzero(lp_weight_mass(sol, vmap) > SELECT_TOL)
        incumbent, _ = solve_restricted(d, h, bounds, K0, milp_time_limit, backend)
        upper_bound = incumbent.objective
    u = bounds.u.copy()
    neg_l = -bounds.l.copy()
    warm = None
    for k in range(d.n):
        model, _ = build_probe_lp(d, h, bounds, k, upper_bound)
        probe = solve_lp(model, warm_start=warm, backend=backend)
        if not probe.optimal:
            log.warning("probe LP for feature %d ended with status %s; bound kept", k, probe.status)
            continue
        warm = probe.basis
        u_bar = max(0.0, -probe.objective)
        if u_bar < max(neg_l[k], u[k]):
            u[k] = min(u[k], u_bar)
            neg_l[k] = min(neg_l[k], u_bar)
    return BoundsVector(-neg_l, u), float(upper_bound), incumbent


def strategy2_bound(j0: int, side: str, lp_sol: LpSolution, UB: float, bounds: BoundsVector, budget: BudgetSpec,
                    d: Dataset, vmap: VariableMap | None = None, budget_term: bool = False) -> float:
    """Largest value w+_j0 (side="plus") or w-_j0 ("minus") can take in a solution of cost <= UB.

    Valid only for features carrying no weight in the LP relaxation.
    """
    vmap = vmap or full_layout(d.n, d.m)
    mass = lp_sol.primal[vmap.w_plus[j0]] + lp_sol.primal[vmap.w_minus[j0]]
    if mass > SELECT_TOL:
        raise ValueError(f"feature {j0} has LP weight {mass:.3g}; the Lagrangian bound needs zero weight")
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    corr = dual_correlation(d, lp_sol, vmap, j0)
    denom = 1.0 - corr if side == "plus" else 1.0 + corr
    quotient = max(0.0, UB - lp_sol.objective) / denom if denom > DENOM_TOL else np.inf
    if not budget_term:
        return quotient
    slack = budget.B - float(np.sum(lp_sol.primal[vmap.v[vmap.features]]))
    scale = bounds.u[j0] if side == "plus" else -bounds.l[j0]
    if slack <= 0:
        log.info("budget term for feature %d dropped: LP uses the whole budget", j0)
        return quotient
    return min(quotient, scale * slack)


def strategy2(d: Dataset, h: Hyperparams, bounds: BoundsVector, UB: float, lp_sol: LpSolution | None = None,
              budget_term: bool = False, backend: str | None = None) -> BoundsVector:
    if lp_sol is None:
        lp_sol, vmap = solve_relaxation(d, h, bounds, backend)
    else:
        vmap = full_layout(d.n, d.m)
    mass = lp_weight_mass(lp_sol, vmap)
    u = bounds.u.copy()
    neg_l = -bounds.l.copy()
    for j0 in np.flatnonzero(mass <= SELECT_TOL):
        j0 = int(j0)
        u[j0] = min(u[j0], strategy2_bound(j0, "plus", lp_sol, UB, bounds, h.budget, d, vmap, budget_term))
        neg_l[j0] = min(neg_l[j0], strategy2_bound(j0, "minus", lp_sol, UB, bounds, h.budget, d, vmap,
                                                   budget_term))
    return BoundsVector(-neg_l, u)


def tighten(d: Dataset, h: Hyperparams, bounds: BoundsVector | None = None, strategies: str = "12",
            upper_bound: float | None = None, milp_time_limit: float = 900.0, budget_term: bool = False,
            backend: str | None = None) -> TighteningReport:
    """Run the requested strategies ("1", "2" or "12") and report ΔB, the bound used and the LP bound."""
    before = bounds or BoundsVector.default(d.n)
    after = before
    incumbent = None
    t1 = t2 = 0.0
    if "1" in strategies:
        t = time.perf_counter()
        after, upper_bound, incumbent = strategy1(d, h, after, upper_bound, milp_time_limit, backend)
        t1 = time.perf_counter() - t
    if "2" in strategies:
        t = time.perf_counter()
        if upper_bound is None:
            sol, vmap = solve_relaxation(d, h, after, backend)
            K0 = np.flatnonzero(lp_weight_mass(sol, vmap) > SELECT_TOL)
            incumbent, _ = solve_restricted(d, h, after, K0, milp_time_limit, backend)
            upper_bound = incumbent.objective
        after = strategy2(d, h, after, upper_bound, budget_term=budget_term, backend=backend)
        t2 = time.perf_counter() - t
    lp_lb = solve_relaxation(d, h, after, backend)[0].objective
    ub = np.nan if upper_bound is None else upper_bound
    return TighteningReport(before, after, float(ub), float(lp_lb), t1, t2, incumbent)
