"""Adapter onto scipy's HiGHS LP solver behind the common solving contract."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .model import EQ, GE, LE, LpSolution, MilpModel

_STATUS = {0: "optimal", 1: "time-limit", 2: "infeasible", 3: "unbounded", 4: "numerical-failure"}


def solve(model: MilpModel, time_limit: float | None = None, **_: object) -> LpSolution:
    sense = np.array(model.sense)
    le = sense == LE
    ge = sense == GE
    eq = sense == EQ
    A_ub = np.vstack([model.A[le], -model.A[ge]])
    b_ub = np.concatenate([model.rhs[le], -model.rhs[ge]])
    options = {"presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    res = linprog(model.c,
                  A_ub=A_ub if A_ub.size else None, b_ub=b_ub if A_ub.size else None,
                  A_eq=model.A[eq] if eq.any() else None, b_eq=model.rhs[eq] if eq.any() else None,
                  bounds=np.column_stack([model.lb, model.ub]), method="highs", options=options)
    status = _STATUS.get(res.status, "numerical-failure")
    if status != "optimal":
        return LpSolution(status, iterations=int(getattr(res, "nit", 0)), message=res.message)
    duals = np.zeros(model.num_rows)
    if A_ub.size:
        mu = res.ineqlin.marginals
        nle = int(le.sum())
        duals[le] = mu[:nle]
        duals[ge] = -mu[nle:]
    if eq.any():
        duals[eq] = res.eqlin.marginals
    red = res.lower.marginals + res.upper.marginals
    x = np.asarray(res.x, dtype=float)
    return LpSolution("optimal", float(model.c @ x + model.obj_const), x, duals, red,
                      int(getattr(res, "nit", 0)))
