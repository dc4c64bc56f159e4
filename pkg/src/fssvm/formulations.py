"""Model builders: l1-SVM, MILP1, FS-SVM and its restricted / semi-relaxed / probing variants.

Variable layout of every FS-SVM-family model is
``[w+ (|K|), w- (|K|), v (|K|), b, xi (m)]`` where ``K`` is the set of
features that exist in the model (all of them unless restricted).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset
from .lp import GE, LE, LpSolution, MilpModel, ModelBuilder

DEFAULT_BIG_M = 1000.0
SELECT_TOL = 1e-6


@dataclass(frozen=True)
class BudgetSpec:
    B: float
    costs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.B >= 0:
            raise ValueError(f"budget must be nonnegative, got {self.B}")
        if self.costs is not None:
            costs = np.asarray(self.costs, dtype=float)
            if not np.all(np.isfinite(costs)) or np.any(costs < 0):
                raise ValueError("feature costs must be finite and >= 0")
            object.__setattr__(self, "costs", costs)

    def cost(self, j: int) -> float:
        return 1.0 if self.costs is None else float(self.costs[j])

    def max_features(self) -> int:
        """Largest number of features any feasible selection can hold (unit costs)."""
        return int(np.floor(self.B + 1e-9))


@dataclass(frozen=True)
class Hyperparams:
    C: float
    budget: BudgetSpec

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")

    @classmethod
    def of(cls, C: float, B: float) -> "Hyperparams":
        return cls(C, BudgetSpec(B))


@dataclass(frozen=True)
class BoundsVector:
    """Big-M pair per feature: ``l_j v_j <= w_j <= u_j v_j`` with ``l_j <= 0 <= u_j``."""

    l: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        l = np.array(self.l, dtype=float)
        u = np.array(self.u, dtype=float)
        if l.shape != u.shape:
            raise ValueError("l and u must have the same length")
        if np.any(l > 0) or np.any(u < 0):
            raise ValueError("bounds must satisfy l_j <= 0 <= u_j")
        if not (np.all(np.isfinite(l)) and np.all(np.isfinite(u))):
            raise ValueError("bounds must be finite")
        l.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)

    @classmethod
    def default(cls, n: int, big_m: float = DEFAULT_BIG_M) -> "BoundsVector":
        return cls(np.full(n, -big_m), np.full(n, big_m))

    @property
    def delta_b(self) -> float:
        return float(np.mean(self.u - self.l)) if self.u.size else 0.0

    def dominated_by(self, other: "BoundsVector", tol: float = 1e-12) -> bool:
        return bool(np.all(self.u <= other.u + tol) and np.all(-self.l <= -other.l + tol))


@dataclass(frozen=True)
class VariableMap:
    """Index bookkeeping from model columns back to SVM quantities.

    Feature arrays have length n; ``-1`` marks a feature absent from the model.
    """

    kind: str
    n: int
    m: int
    num_vars: int
    b: int
    xi: np.ndarray
    w_plus: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    w_minus: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    v: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    w: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    margin_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def features(self) -> np.ndarray:
        ref = self.v if self.v.size else self.w
        return np.flatnonzero(ref >= 0)

    def weights(self, x: np.ndarray) -> np.ndarray:
        w = np.zeros(self.n)
        if self.w_plus.size:
            for j in self.features:
                w[j] = x[self.w_plus[j]] - x[self.w_minus[j]]
        else:
            for j in self.features:
                w[j] = x[self.w[j]]
        return w

    def v_values(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        for j in self.features:
            out[j] = x[self.v[j]]
        return out

    def embed(self, x: np.ndarray, target: "VariableMap") -> np.ndarray:
        """Map a solution vector of this model onto the columns of ``target``.

        Features absent here get zero weight and zero selector in ``target``.
        """
        out = np.zeros(target.num_vars)
        out[target.b] = x[self.b]
        out[target.xi] = x[self.xi]
        for j in self.features:
            if target.v[j] < 0:
                continue
            out[target.w_plus[j]] = x[self.w_plus[j]]
            out[target.w_minus[j]] = x[self.w_minus[j]]
            out[target.v[j]] = x[self.v[j]]
        return out


@dataclass
class Classifier:
    w: np.ndarray
    b: float
    selected: tuple[int, ...]
    objective: float
    stats: dict = field(default_factory=dict)

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.w + self.b

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(x) >= 0, 1, -1)

    def to_dict(self) -> dict:
        return {"w": [float(v) for v in self.w], "b": float(self.b),
                "selected": [int(j) for j in self.selected], "objective": float(self.objective),
                **{k: v for k, v in self.stats.items() if isinstance(v, (int, float, str, bool))}}


def _feature_set(K: Iterable[int] | None, n: int) -> list[int]:
    if K is None:
        return list(range(n))
    ks = sorted(set(int(j) for j in K))
    if ks and (ks[0] < 0 or ks[-1] >= n):
        raise ValueError(f"feature set {ks} is not a subset of 0..{n - 1}")
    return ks


def _fs_family(d: Dataset, h: Hyperparams, bounds: BoundsVector, K: Sequence[int] | None,
               binary_on: Iterable[int] | None, kind: str) -> tuple[MilpModel, VariableMap]:
    n, m = d.n, d.m
    if bounds.u.shape != (n,):
        raise ValueError(f"bounds have {bounds.u.shape[0]} entries, dataset has {n} features")
    feats = _feature_set(K, n)
    binary = set(feats) if binary_on is None else set(binary_on) & set(feats)
    mb = ModelBuilder()
    wp = np.full(n, -1)
    wm = np.full(n, -1)
    v = np.full(n, -1)
    for j in feats:
        wp[j] = mb.add_var(f"wp[{j}]", 0.0, np.inf, 1.0)
    for j in feats:
        wm[j] = mb.add_var(f"wm[{j}]", 0.0, np.inf, 1.0)
    for j in feats:
        v[j] = mb.add_var(f"v[{j}]", 0.0, 1.0, 0.0, binary=j in binary)
    b = mb.add_var("b", -np.inf, np.inf, 0.0)
    xi = np.array([mb.add_var(f"xi[{i}]", 0.0, np.inf, h.C) for i in range(m)])
    rows = []
    for i in range(m):
        yi = float(d.y[i])
        coeffs = {b: yi, int(xi[i]): 1.0}
        for j in feats:
            a = yi * d.x[i, j]
            if a != 0.0:
                coeffs[int(wp[j])] = a
                coeffs[int(wm[j])] = -a
        rows.append(mb.add_row(coeffs, GE, 1.0, f"margin[{i}]"))
    mb.add_row({int(v[j]): h.budget.cost(j) for j in feats}, LE, h.budget.B, "budget")
    for j in feats:
        mb.add_row({int(wp[j]): 1.0, int(v[j]): -float(bounds.u[j])}, LE, 0.0, f"ub[{j}]")
    for j in feats:
        mb.add_row({int(wm[j]): 1.0, int(v[j]): float(bounds.l[j])}, LE, 0.0, f"lb[{j}]")
    model = mb.build()
    vmap = VariableMap(kind, n, m, model.num_vars, b, xi, wp, wm, v, margin_rows=np.array(rows))
    return model, vmap


def full_layout(n: int, m: int, kind: str = "fs-svm") -> VariableMap:
    """The VariableMap that :func:`build_fs_svm` produces for an m x n dataset."""
    idx = np.arange(n)
    return VariableMap(kind, n, m, 3 * n + 1 + m, 3 * n, 3 * n + 1 + np.arange(m),
                       idx, n + idx, 2 * n + idx, margin_rows=np.arange(m))


def build_fs_svm(d: Dataset, h: Hyperparams, bounds: BoundsVector) -> tuple[MilpModel, VariableMap]:
    return _fs_family(d, h, bounds, None, None, "fs-svm")


def build_fs_svm_restricted(d: Dataset, h: Hyperparams, bounds: BoundsVector,
                            K: Iterable[int]) -> tuple[MilpModel, VariableMap]:
    """FS-SVM with the variables of features outside ``K`` removed (fixed to zero)."""
    return _fs_family(d, h, bounds, list(K), None, "fs-svm-restricted")


def build_sr_fs_svm(d: Dataset, h: Hyperparams, bounds: BoundsVector,
                    K: Iterable[int]) -> tuple[MilpModel, VariableMap]:
    """Semi-relaxed FS-SVM: selectors binary on ``K``, continuous in [0, 1] elsewhere."""
    return _fs_family(d, h, bounds, None, list(K), "sr-fs-svm")


def build_lp_relaxation(d: Dataset, h: Hyperparams, bounds: BoundsVector) -> tuple[MilpModel, VariableMap]:
    return _fs_family(d, h, bounds, None, (), "lp-fs-svm")


def objective_coeffs(vmap: VariableMap, C: float) -> dict[int, float]:
    """The FS-SVM objective as a sparse row (used for objective caps)."""
    coeffs: dict[int, float] = {}
    for j in vmap.features:
        coeffs[int(vmap.w_plus[j])] = 1.0
        coeffs[int(vmap.w_minus[j])] = 1.0
    for i in vmap.xi:
        coeffs[int(i)] = C
    return coeffs


def build_probe_lp(d: Dataset, h: Hyperparams, bounds: BoundsVector, k: int,
                   UB: float) -> tuple[MilpModel, VariableMap]:
    """LP maximizing ``w+_k + w-_k`` over the relaxed FS-SVM with objective capped at ``UB``.

    Built as a minimization of the negated objective.
    """
    if not np.isfinite(UB):
        raise ValueError("probe LP needs a finite upper bound")
    model, vmap = build_lp_relaxation(d, h, bounds)
    model = model.add_constraint(objective_coeffs(vmap, h.C), LE, UB, "objective_cap")
    c = np.zeros(model.num_vars)
    c[vmap.w_plus[k]] = -1.0
    c[vmap.w_minus[k]] = -1.0
    return model.with_objective(c), vmap


def build_l1_svm(d: Dataset, C: float) -> tuple[MilpModel, VariableMap]:
    n, m = d.n, d.m
    mb = ModelBuilder()
    w = np.array([mb.add_var(f"w[{j}]", -np.inf, np.inf, 0.0) for j in range(n)], dtype=int)
    z = np.array([mb.add_var(f"z[{j}]", 0.0, np.inf, 1.0) for j in range(n)], dtype=int)
    b = mb.add_var("b", -np.inf, np.inf, 0.0)
    xi = np.array([mb.add_var(f"xi[{i}]", 0.0, np.inf, C) for i in range(m)], dtype=int)
    rows = []
    for i in range(m):
        yi = float(d.y[i])
        coeffs = {b: yi, int(xi[i]): 1.0}
        for j in range(n):
            if d.x[i, j] != 0.0:
                coeffs[int(w[j])] = yi * d.x[i, j]
        rows.append(mb.add_row(coeffs, GE, 1.0, f"margin[{i}]"))
    for j in range(n):
        mb.add_row({int(w[j]): 1.0, int(z[j]): -1.0}, LE, 0.0, f"abs_hi[{j}]")
        mb.add_row({int(w[j]): -1.0, int(z[j]): -1.0}, LE, 0.0, f"abs_lo[{j}]")
    model = mb.build()
    return model, VariableMap("l1-svm", n, m, model.num_vars, b, xi, w=w, z=z, margin_rows=np.array(rows))


def build_milp1(d: Dataset, bounds: BoundsVector, budget: BudgetSpec) -> tuple[MilpModel, VariableMap]:
    """Deviation-only model: min sum xi with big-M links and the budget row."""
    n, m = d.n, d.m
    mb = ModelBuilder()
    w = np.array([mb.add_var(f"w[{j}]", -np.inf, np.inf, 0.0) for j in range(n)], dtype=int)
    v = np.array([mb.add_var(f"v[{j}]", 0.0, 1.0, 0.0, binary=True) for j in range(n)], dtype=int)
    b = mb.add_var("b", -np.inf, np.inf, 0.0)
    xi = np.array([mb.add_var(f"xi[{i}]", 0.0, np.inf, 1.0) for i in range(m)], dtype=int)
    rows = []
    for i in range(m):
        yi = float(d.y[i])
        coeffs = {b: yi, int(xi[i]): 1.0}
        for j in range(n):
            if d.x[i, j] != 0.0:
                coeffs[int(w[j])] = yi * d.x[i, j]
        rows.append(mb.add_row(coeffs, GE, 1.0, f"margin[{i}]"))
    for j in range(n):
        mb.add_row({int(w[j]): 1.0, int(v[j]): -float(bounds.u[j])}, LE, 0.0, f"ub[{j}]")
        mb.add_row({int(w[j]): -1.0, int(v[j]): float(bounds.l[j])}, LE, 0.0, f"lb[{j}]")
    mb.add_row({int(v[j]): budget.cost(j) for j in range(n)}, LE, budget.B, "budget")
    model = mb.build()
    return model, VariableMap("milp1", n, m, model.num_vars, b, xi, v=v, w=w, margin_rows=np.array(rows))


def extract_classifier(vmap: VariableMap, sol: LpSolution | np.ndarray, objective: float | None = None,
                       **stats) -> Classifier:
    if isinstance(sol, LpSolution):
        if not sol.optimal:
            raise ValueError(f"cannot extract a classifier from a {sol.status!r} solution")
        x, objective = sol.primal, sol.objective if objective is None else objective
    else:
        x = np.asarray(sol, dtype=float)
        if objective is None:
            raise ValueError("objective is required when extracting from a raw vector")
    w = vmap.weights(x)
    w[np.abs(w) <= SELECT_TOL] = 0.0
    selected = tuple(int(j) for j in np.flatnonzero(w))
    return Classifier(w, float(x[vmap.b]), selected, float(objective), dict(stats))


def full_solution_vector(vmap: VariableMap, clf: Classifier, d: Dataset) -> np.ndarray:
    """Reconstruct FS-SVM column values (w+, w-, v, b, xi) for ``clf`` on ``d``."""
    x = np.zeros(vmap.num_vars)
    x[vmap.b] = clf.b
    margins = d.y * (d.x @ clf.w + clf.b)
    x[vmap.xi] = np.maximum(0.0, 1.0 - margins)
    for j in vmap.features:
        if clf.w[j] > 0:
            x[vmap.w_plus[j]] = clf.w[j]
        elif clf.w[j] < 0:
            x[vmap.w_minus[j]] = -clf.w[j]
        if vmap.v.size:
            x[vmap.v[j]] = 1.0 if j in clf.selected else 0.0
    return x
