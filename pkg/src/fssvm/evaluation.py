"""Cross-validated grid evaluation, confusion-count metrics and the Fisher-score filter baseline."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset, FoldPlan, Scaler, make_folds
from .formulations import BoundsVector, BudgetSpec, Classifier, Hyperparams
from .kernel_search import KsConfig, run_kernel_search
from .train import solve_fs_svm, solve_l1_svm, solve_milp1

log = logging.getLogger(__name__)

METHODS = ("fs-svm", "ks-fs-svm", "milp1", "l1-svm", "fisher-filter")
RESULT_COLUMNS = ("dataset", "method", "B", "C", "fold", "tp", "tn", "fp", "fn", "acc", "auc", "n_selected",
                  "seconds", "gap_percent")
SUMMARY_COLUMNS = ("dataset", "method", "B", "C", "avg_acc", "avg_auc", "avg_features", "avg_time", "folds",
                   "degraded")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "ConfusionCounts":
        y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
        return cls(int(np.sum((y_true == 1) & (y_pred == 1))), int(np.sum((y_true == -1) & (y_pred == -1))),
                   int(np.sum((y_true == -1) & (y_pred == 1))), int(np.sum((y_true == 1) & (y_pred == -1))))


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return (c.tp + c.tn) / c.total


def auc(c: ConfusionCounts) -> float:
    """Mean of the true-positive and true-negative rates; an absent class scores 1 with a warning."""
    if c.total == 0:
        raise ValueError("auc of an empty set is undefined")
    terms = []
    for hit, miss, name in ((c.tp, c.fn, "positive"), (c.tn, c.fp, "negative")):
        if hit + miss == 0:
            log.warning("no %s objects in the evaluated set; its rate counts as 1", name)
            terms.append(1.0)
        else:
            terms.append(hit / (hit + miss))
    return sum(terms) / 2


def fisher_scores(d: Dataset, eps: float = 1e-12) -> np.ndarray:
    pos, neg = d.x[d.y == 1], d.x[d.y == -1]
    return (pos.mean(axis=0) - neg.mean(axis=0)) ** 2 / (pos.var(axis=0) + neg.var(axis=0) + eps)


@dataclass
class FoldOutcome:
    fold: int
    counts: ConfusionCounts | None
    n_selected: int
    seconds: float
    gap_percent: float = 0.0
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.counts is not None


@dataclass
class GridResult:
    method: str
    B: float
    C: float
    per_fold: list[FoldOutcome] = field(default_factory=list)
    dataset: str = ""

    def _good(self) -> list[FoldOutcome]:
        return [f for f in self.per_fold if f.ok]

    @property
    def degraded(self) -> bool:
        return any(not f.ok for f in self.per_fold)

    def _mean(self, values: list[float]) -> float:
        return float(np.mean(values)) if values else float("nan")

    @property
    def avg_acc(self) -> float:
        return self._mean([accuracy(f.counts) for f in self._good()])

    @property
    def avg_auc(self) -> float:
        return self._mean([auc(f.counts) for f in self._good()])

    @property
    def avg_features(self) -> float:
        return self._mean([f.n_selected for f in self._good()])

    @property
    def avg_time(self) -> float:
        return self._mean([f.seconds for f in self._good()])


@dataclass
class CvLimits:
    time_limit: float = 7200.0
    big_m: float = 1000.0
    scale: str = "minmax"
    ks: KsConfig = field(default_factory=KsConfig)
    backend: str | None = None


def _fisher_filter(d: Dataset, B: float, C: float, backend: str | None) -> Classifier:
    keep = int(np.floor(B + 1e-9))
    scores = fisher_scores(d)
    cols = sorted(int(j) for j in np.lexsort((np.arange(d.n), -scores))[:keep])
    if not cols:
        # nothing affordable: only the intercept is trained
        cols_clf = solve_l1_svm(Dataset(d.name, np.zeros((d.m, 1)), d.y), C, backend)
        return Classifier(np.zeros(d.n), cols_clf.b, (), cols_clf.objective, cols_clf.stats)
    sub = solve_l1_svm(d.select_features(cols), C, backend)
    w = np.zeros(d.n)
    w[cols] = sub.w
    return Classifier(w, sub.b, tuple(int(cols[i]) for i in np.flatnonzero(sub.w)), sub.objective, sub.stats)


def train(method: str, d: Dataset, B: float, C: float, limits: CvLimits) -> Classifier:
    bounds = BoundsVector.default(d.n, limits.big_m)
    h = Hyperparams(C, BudgetSpec(B))
    if method == "fs-svm":
        return solve_fs_svm(d, h, bounds, limits.time_limit, backend=limits.backend)[0]
    if method == "ks-fs-svm":
        return run_kernel_search(d, h, bounds, limits.ks)[0]
    if method == "milp1":
        return solve_milp1(d, h.budget, bounds, limits.time_limit, limits.backend)[0]
    if method == "l1-svm":
        return solve_l1_svm(d, C, limits.backend)
    if method == "fisher-filter":
        return _fisher_filter(d, B, C, limits.backend)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _split(d: Dataset, folds: FoldPlan, fold: int, scale: str) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Training Dataset plus raw test arrays (a test fold may hold a single class)."""
    tr = d.subset(folds.train_indices(fold))
    test = folds.test_indices(fold)
    x_te, y_te = d.x[test], d.y[test]
    if scale in ("none", None):
        return tr, x_te, y_te
    if scale not in ("minmax", "minmax-symmetric"):
        raise ValueError(f"unknown scaling mode {scale!r}")
    sc = Scaler.fit(tr.x)
    return Dataset(tr.name, sc.transform(tr.x), tr.y, tr.feature_names), sc.transform(x_te), y_te


def evaluate_fold(d: Dataset, method: str, B: float, C: float, folds: FoldPlan, fold: int,
                  limits: CvLimits) -> FoldOutcome:
    """Train on the out-of-fold objects (scaler fit there too) and score the held-out fold."""
    tr, x_te, y_te = _split(d, folds, fold, limits.scale)
    t0 = time.perf_counter()
    try:
        clf = train(method, tr, B, C, limits)
    except Exception as exc:  # a failed cell is reported, not fatal
        log.warning("%s B=%g C=%g fold %d failed: %s", method, B, C, fold, exc)
        return FoldOutcome(fold, None, 0, time.perf_counter() - t0, float("nan"), str(exc))
    seconds = time.perf_counter() - t0
    counts = ConfusionCounts.from_predictions(y_te, clf.predict(x_te))
    return FoldOutcome(fold, counts, len(clf.selected), seconds, float(clf.stats.get("gap_percent", 0.0)))


def _task(args) -> tuple[int, FoldOutcome]:
    cell, d, method, B, C, folds, fold, limits = args
    return cell, evaluate_fold(d, method, B, C, folds, fold, limits)


def run_cv(d: Dataset, method: str, grid: tuple[Sequence[float], Sequence[float]], folds: FoldPlan,
           limits: CvLimits | None = None, jobs: int = 1) -> list[GridResult]:
    """One GridResult per (B, C) cell, each holding the outcome of every fold."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    B_list, C_list = list(grid[0]), list(grid[1])
    if not B_list or not C_list:
        raise ValueError("grid needs at least one B and one C")
    limits = limits or CvLimits()
    cells = [GridResult(method, float(B), float(C), dataset=d.name) for B in B_list for C in C_list]
    tasks = [(i, d, method, c.B, c.C, folds, f, limits) for i, c in enumerate(cells) for f in range(folds.k)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_task, tasks))
    else:
        outcomes = [_task(t) for t in tasks]
    for cell, outcome in outcomes:
        cells[cell].per_fold.append(outcome)
    return cells


def best_cell(results: Sequence[GridResult]) -> GridResult:
    """Highest avg_acc, then highest avg_auc, then fewest average features."""
    usable = [r for r in results if r._good()]
    if not usable:
        raise ValueError("no cell has a successful fold")
    return min(usable, key=lambda r: (-r.avg_acc, -r.avg_auc, r.avg_features))


def seed_sweep(d: Dataset, method: str, B: float, C: float, seeds: Sequence[int], k: int = 10,
               limits: CvLimits | None = None, jobs: int = 1) -> list[GridResult]:
    """Repeat k-fold CV of a single cell under several fold seeds."""
    return [run_cv(d, method, ([B], [C]), make_folds(d, k, s), limits, jobs)[0] for s in seeds]


def write_results_csv(results: Sequence[GridResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in results:
            for f in r.per_fold:
                c = f.counts
                if c is None:
                    w.writerow([r.dataset, r.method, r.B, r.C, f.fold, "", "", "", "", "", "", f.n_selected,
                                f"{f.seconds:.6f}", ""])
                    continue
                w.writerow([r.dataset, r.method, r.B, r.C, f.fold, c.tp, c.tn, c.fp, c.fn, f"{accuracy(c):.6f}",
                            f"{auc(c):.6f}", f.n_selected, f"{f.seconds:.6f}", f"{f.gap_percent:.6g}"])


def write_summary_csv(results: Sequence[GridResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow([r.dataset, r.method, r.B, r.C, f"{r.avg_acc:.6f}", f"{r.avg_auc:.6f}",
                        f"{r.avg_features:.4f}", f"{r.avg_time:.6f}", len(r.per_fold), int(r.degraded)])


def write_plot_data(results: Sequence[GridResult], path: str | Path) -> None:
    """Best avg_acc over C for every (method, B): the data behind an accuracy-versus-budget curve."""
    best: dict[tuple[str, float], float] = {}
    for r in results:
        if r._good():
            key = (r.method, r.B)
            best[key] = max(best.get(key, -np.inf), r.avg_acc)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("method", "B", "best_avg_acc"))
        for (method, B), acc in sorted(best.items()):
            w.writerow([method, B, f"{acc:.6f}"])
