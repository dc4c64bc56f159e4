"""LP engine: model representation and a backend-neutral solving contract."""

from __future__ import annotations

import os

from . import highs, simplex
from .model import (EQ, GE, LE, TOL_FEAS, TOL_INT, Basis, LpSolution, MilpModel, ModelBuilder,
                    ModelError, dual_objective, fix_variable, write_lp)

BACKENDS = {"simplex": simplex.solve, "highs": highs.solve}
_default_backend = os.environ.get("FSSVM_LP_BACKEND", "simplex")


def set_default_backend(name: str) -> None:
    global _default_backend
    if name not in BACKENDS:
        raise ValueError(f"unknown LP backend {name!r}; choose from {sorted(BACKENDS)}")
    _default_backend = name


def default_backend() -> str:
    return _default_backend


def solve_lp(model: MilpModel, time_limit: float | None = None, warm_start: Basis | None = None,
             backend: str | None = None) -> LpSolution:
    """Solve the continuous relaxation of ``model`` (integrality flags are ignored).

    Duals follow the minimization convention: a ``>=`` row has a nonnegative
    multiplier, a ``<=`` row a nonpositive one.  Warm starts are honoured by
    the reference simplex only.
    """
    name = backend or _default_backend
    if name == "simplex":
        return simplex.solve(model, time_limit=time_limit, warm_start=warm_start)
    return BACKENDS[name](model, time_limit=time_limit)


__all__ = [
    "EQ", "GE", "LE", "TOL_FEAS", "TOL_INT", "Basis", "LpSolution", "MilpModel", "ModelBuilder",
    "ModelError", "dual_objective", "fix_variable", "write_lp", "solve_lp", "set_default_backend",
    "default_backend", "BACKENDS",
]
