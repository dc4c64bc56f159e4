"""In-memory LP/MILP models and the solution record shared by all backends."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

LE, GE, EQ = "<=", ">=", "="
SENSES = (LE, GE, EQ)

TOL_FEAS = 1e-7
TOL_INT = 1e-6


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class MilpModel:
    """min c.x + obj_const  s.t.  A x (sense) rhs,  lb <= x <= ub,  x_j binary where flagged.

    Instances are treated as values: every mutator returns a new model.
    """

    c: np.ndarray
    A: np.ndarray
    sense: tuple[str, ...]
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    obj_const: float = 0.0
    var_names: tuple[str, ...] = ()
    row_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        n = c.shape[0]
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        rhs = np.asarray(self.rhs, dtype=float)
        lb = np.asarray(self.lb, dtype=float)
        ub = np.asarray(self.ub, dtype=float)
        binary = np.asarray(self.binary, dtype=bool)
        if A.shape[0] != rhs.shape[0] or len(self.sense) != rhs.shape[0]:
            raise ModelError("row data has inconsistent lengths")
        if lb.shape != (n,) or ub.shape != (n,) or binary.shape != (n,):
            raise ModelError("variable data has inconsistent lengths")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(rhs))):
            raise ModelError("all coefficients must be finite")
        if any(s not in SENSES for s in self.sense):
            raise ModelError(f"unknown constraint sense in {set(self.sense)}")
        if np.any(lb > ub):
            j = int(np.flatnonzero(lb > ub)[0])
            raise ModelError(f"variable {j}: lower bound {lb[j]} exceeds upper bound {ub[j]}")
        if np.any(binary & ((lb < 0) | (ub > 1))):
            raise ModelError("binary variables must have bounds within [0, 1]")
        for name, arr in (("c", c), ("A", A), ("rhs", rhs), ("lb", lb), ("ub", ub), ("binary", binary)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sense", tuple(self.sense))

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.rhs.shape[0]

    @property
    def binaries(self) -> np.ndarray:
        return np.flatnonzero(self.binary)

    def relaxed(self) -> "MilpModel":
        return replace(self, binary=np.zeros(self.num_vars, dtype=bool))

    def with_bounds(self, lb: np.ndarray | None = None, ub: np.ndarray | None = None) -> "MilpModel":
        return replace(self, lb=self.lb if lb is None else lb, ub=self.ub if ub is None else ub)

    def with_objective(self, c: np.ndarray, obj_const: float = 0.0) -> "MilpModel":
        return replace(self, c=c, obj_const=obj_const)

    def add_constraint(self, coeffs: Mapping[int, float] | np.ndarray, sense: str, rhs: float,
                       name: str = "") -> "MilpModel":
        row = np.zeros(self.num_vars)
        if isinstance(coeffs, np.ndarray):
            row[:] = coeffs
        else:
            for j, a in coeffs.items():
                row[j] += a
        names = self.row_names + (name or f"r{self.num_rows}",) if self.row_names else ()
        return replace(self, A=np.vstack([self.A, row]), sense=self.sense + (sense,),
                       rhs=np.append(self.rhs, rhs), row_names=names)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.obj_const)

    def violation(self, x: np.ndarray, integrality: bool = True) -> float:
        """Largest absolute violation of bounds, rows and (optionally) integrality."""
        x = np.asarray(x, dtype=float)
        worst = float(max(np.max(self.lb - x, initial=0.0), np.max(x - self.ub, initial=0.0)))
        if self.num_rows:
            act = self.A @ x
            s = np.array(self.sense)
            gap = np.where(s == LE, act - self.rhs, np.where(s == GE, self.rhs - act, np.abs(act - self.rhs)))
            worst = max(worst, float(np.max(gap, initial=0.0)))
        if integrality and self.binary.any():
            xb = x[self.binary]
            worst = max(worst, float(np.max(np.abs(xb - np.round(xb)))))
        return worst

    def is_feasible(self, x: np.ndarray, tol: float = 1e-6, integrality: bool = True) -> bool:
        return self.violation(x, integrality) <= tol


def fix_variable(model: MilpModel, var: int, value: float) -> MilpModel:
    """Return a copy of ``model`` with ``lb = ub = value`` for ``var``."""
    lo, hi = model.lb[var], model.ub[var]
    if not (lo - TOL_FEAS <= value <= hi + TOL_FEAS):
        raise ModelError(f"value {value} outside bounds [{lo}, {hi}] of variable {var}")
    if model.binary[var] and value not in (0, 1, 0.0, 1.0):
        raise ModelError(f"binary variable {var} can only be fixed to 0 or 1, got {value}")
    lb = model.lb.copy()
    ub = model.ub.copy()
    lb[var] = ub[var] = value
    return model.with_bounds(lb, ub)


class ModelBuilder:
    """Incremental construction of a :class:`MilpModel` by named variables and sparse rows."""

    def __init__(self) -> None:
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._bin: list[bool] = []
        self._names: list[str] = []
        self._rows: list[dict[int, float]] = []
        self._sense: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self.obj_const = 0.0

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf, cost: float = 0.0,
                binary: bool = False) -> int:
        self._c.append(cost)
        self._lb.append(lb)
        self._ub.append(ub)
        self._bin.append(binary)
        self._names.append(name)
        return len(self._c) - 1

    def add_row(self, coeffs: Mapping[int, float], sense: str, rhs: float, name: str = "") -> int:
        self._rows.append(dict(coeffs))
        self._sense.append(sense)
        self._rhs.append(rhs)
        self._row_names.append(name or f"r{len(self._rows) - 1}")
        return len(self._rows) - 1

    def build(self) -> MilpModel:
        n = len(self._c)
        A = np.zeros((len(self._rows), n))
        for i, row in enumerate(self._rows):
            for j, a in row.items():
                A[i, j] += a
        return MilpModel(np.array(self._c), A, tuple(self._sense), np.array(self._rhs),
                         np.array(self._lb), np.array(self._ub), np.array(self._bin, dtype=bool),
                         self.obj_const, tuple(self._names), tuple(self._row_names))


@dataclass
class Basis:
    """Simplex basis over columns [structural..., slack...] usable as a warm start."""

    basic: np.ndarray
    at_upper: np.ndarray

    def copy(self) -> "Basis":
        return Basis(self.basic.copy(), self.at_upper.copy())


@dataclass
class LpSolution:
    status: str
    objective: float = np.nan
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    basis: Basis | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def dual_objective(model: MilpModel, sol: LpSolution) -> float:
    """b.y plus the bound terms of the reduced costs; equals the primal optimum at optimality."""
    x = sol.primal
    d = sol.reduced_costs
    at_lo = np.isclose(x, model.lb, atol=1e-9) & np.isfinite(model.lb)
    at_hi = np.isclose(x, model.ub, atol=1e-9) & np.isfinite(model.ub) & ~at_lo
    bound_term = float(np.sum(d[at_lo] * model.lb[at_lo]) + np.sum(d[at_hi] * model.ub[at_hi]))
    return float(model.rhs @ sol.duals) + bound_term + model.obj_const


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def write_lp(model: MilpModel, path: str | Path) -> None:
    """Dump ``model`` in CPLEX LP text format for cross-checking with external solvers."""
    names = list(model.var_names) or [f"x{j}" for j in range(model.num_vars)]
    names = [n.replace("[", "(").replace("]", ")") for n in names]

    def expr(coefs: np.ndarray) -> str:
        terms = [f"{'+' if a >= 0 else '-'} {_fmt(abs(a))} {names[j]}" for j, a in enumerate(coefs) if a != 0]
        return " ".join(terms) if terms else "0 " + names[0]

    lines = ["\\ written by fssvm", "Minimize", f" obj: {expr(model.c)}"]
    if model.obj_const:
        lines[-1] += f" + {_fmt(model.obj_const)} constant"
    lines.append("Subject To")
    rnames = model.row_names or tuple(f"r{i}" for i in range(model.num_rows))
    for i in range(model.num_rows):
        lines.append(f" {rnames[i]}: {expr(model.A[i])} {model.sense[i]} {_fmt(model.rhs[i])}")
    lines.append("Bounds")
    for j in range(model.num_vars):
        lo, hi = model.lb[j], model.ub[j]
        if np.isinf(lo) and np.isinf(hi):
            lines.append(f" {names[j]} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else _fmt(lo)
            hi_s = "+inf" if np.isinf(hi) else _fmt(hi)
            lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    bins = [names[j] for j in model.binaries]
    if bins:
        lines.append("Binaries")
        lines.extend(f" {b}" for b in bins)
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

