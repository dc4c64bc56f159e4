"""Dataset ingestion, label normalization, feature scaling and fold planning."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

DEFAULT_LABEL_MAP: dict[str, int] = {"0": -1, "1": 1, "-1": -1, "+1": 1}


class DataError(ValueError):
    """Raised for malformed or unusable datasets."""


@dataclass(frozen=True)
class Dataset:
    name: str
    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=int)
        if x.ndim != 2:
            raise DataError("x must be a 2-d matrix")
        if y.shape != (x.shape[0],):
            raise DataError(f"expected {x.shape[0]} labels, got {y.shape}")
        if x.shape[0] == 0:
            raise DataError("empty dataset")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite feature value")
        if not np.all(np.isin(y, (-1, 1))):
            raise DataError("labels must be -1 or +1")
        if np.all(y == 1) or np.all(y == -1):
            raise DataError("single-class dataset")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"f{j + 1}" for j in range(x.shape[1])))

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def subset(self, rows: Sequence[int] | np.ndarray, name: str | None = None) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(name or self.name, self.x[rows], self.y[rows], self.feature_names)

    def select_features(self, cols: Sequence[int]) -> "Dataset":
        cols = list(cols)
        return Dataset(self.name, self.x[:, cols], self.y,
                       tuple(self.feature_names[j] for j in cols))


@dataclass(frozen=True)
class IngestOptions:
    label_column: str = "label"
    label_map: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_LABEL_MAP))


def _map_label(raw: str, label_map: Mapping[str, int]) -> int:
    key = raw.strip()
    if key in label_map:
        return int(label_map[key])
    try:
        value = float(key)
    except ValueError:
        raise DataError(f"unmappable label {raw!r}") from None
    # "1.0" style spellings of a mapped key
    for k, v in label_map.items():
        try:
            if float(k) == value:
                return int(v)
        except ValueError:
            continue
    raise DataError(f"unmappable label {raw!r}")


def parse_label_map(spec: str) -> dict[str, int]:
    """Parse ``"0:-1,1:1"`` into a label map."""
    out: dict[str, int] = {}
    for item in spec.split(","):
        if not item.strip():
            continue
        raw, _, target = item.partition(":")
        value = int(target)
        if value not in (-1, 1):
            raise DataError(f"label map target must be -1 or +1, got {value}")
        out[raw.strip()] = value
    return out


def load_csv(path: str | Path, options: IngestOptions | None = None) -> Dataset:
    options = options or IngestOptions()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if options.label_column not in header:
            raise DataError(f"{path}: missing label column {options.label_column!r}")
        li = header.index(options.label_column)
        rows: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: ragged row ({len(row)} cells, header has {len(header)})")
            try:
                feats = [float(c) for i, c in enumerate(row) if i != li]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature cell") from None
            rows.append(feats)
            labels.append(_map_label(row[li], options.label_map))
    if not rows:
        raise DataError(f"{path}: empty dataset")
    names = tuple(h for i, h in enumerate(header) if i != li)
    return Dataset(path.stem, np.array(rows), np.array(labels), names)


def load_sparse(path: str | Path, n_features: int | None = None,
                options: IngestOptions | None = None) -> Dataset:
    """Read the ``label idx:val ...`` format with 1-based feature indices."""
    options = options or IngestOptions()
    path = Path(path)
    entries: list[dict[int, float]] = []
    labels: list[int] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            head, *pairs = line.split()
            labels.append(_map_label(head, options.label_map))
            row: dict[int, float] = {}
            for p in pairs:
                idx, _, val = p.partition(":")
                try:
                    j = int(idx)
                    row[j] = float(val)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad entry {p!r}") from None
                if j < 1:
                    raise DataError(f"{path}:{lineno}: indices are 1-based")
            entries.append(row)
    if not entries:
        raise DataError(f"{path}: empty dataset")
    n = n_features or max((max(r) for r in entries if r), default=0)
    x = np.zeros((len(entries), n))
    for i, row in enumerate(entries):
        for j, v in row.items():
            if j > n:
                raise DataError(f"{path}: feature index {j} exceeds n={n}")
            x[i, j - 1] = v
    return Dataset(path.stem, x, np.array(labels))


@dataclass(frozen=True)
class Scaler:
    """Affine per-column map onto [-1, 1]; constant columns go to 0."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Scaler":
        return cls(x.min(axis=0), x.max(axis=0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        out = 2.0 * (x - self.lo) / safe - 1.0
        out[:, span <= 0] = 0.0
        return out


def scale_features(d: Dataset, mode: str = "minmax-symmetric") -> Dataset:
    if mode in ("none", None):
        return d
    if mode not in ("minmax-symmetric", "minmax"):
        raise ValueError(f"unknown scaling mode {mode!r}")
    return Dataset(d.name, Scaler.fit(d.x).transform(d.x), d.y, d.feature_names)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        a = np.array(self.assignment, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def make_folds(d: Dataset, k: int, seed: int) -> FoldPlan:
    """Stratified, seeded k-fold assignment.

    Objects of each class are shuffled and dealt round-robin; the dealing
    offset of the second class continues where the first stopped, so fold
    sizes differ by at most one overall as well as per class.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > d.m:
        raise ValueError(f"k={k} exceeds the number of objects m={d.m}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(d.m, dtype=int)
    offset = 0
    for label in (-1, 1):
        idx = np.flatnonzero(d.y == label)
        idx = idx[rng.permutation(len(idx))]
        assignment[idx] = (offset + np.arange(len(idx))) % k
        offset = (offset + len(idx)) % k
    return FoldPlan(k, assignment, seed)


def fold_counts(plan: FoldPlan, y: np.ndarray) -> list[tuple[int, int]]:
    """Per fold (negatives, positives)."""
    return [(int(np.sum((plan.assignment == f) & (y == -1))),
             int(np.sum((plan.assignment == f) & (y == 1)))) for f in range(plan.k)]


__all__ = [
    "DataError", "Dataset", "IngestOptions", "FoldPlan", "Scaler",
    "load_csv", "load_sparse", "scale_features", "make_folds", "parse_label_map",
    "fold_counts",
]
