"""Command-line front end: solve, tighten, ks, exact, cv and oracle subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .data import DataError, Dataset, IngestOptions, load_csv, load_sparse, make_folds, parse_label_map, scale_features
from .evaluation import (METHODS, CvLimits, run_cv, train, write_plot_data, write_results_csv,
                         write_summary_csv)
from .exact import ExactConfig, run_exact
from .formulations import BoundsVector, Hyperparams
from .kernel_search import KsConfig, run_kernel_search
from .oracle import OracleGuardError, enumerate_optimum
from .tightening import tighten
from .train import SolveError

COMMANDS = ("solve", "tighten", "ks", "exact", "cv", "oracle")
SPARSE_SUFFIXES = (".svm", ".libsvm", ".sparse")
EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DEGRADED = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    dataset: str
    label_column: str = "label"
    label_map: str | None = None
    scale: str = "minmax"
    method: str = "fs-svm"
    B: list[float] = field(default_factory=lambda: [1.0])
    C: list[float] = field(default_factory=lambda: [1.0])
    big_m: float = 1000.0
    time_limit: float = 7200.0
    milp_time_limit: float = 900.0
    subproblem_time_limit: float = 1800.0
    bucket_fraction: float = 0.1
    strategies: str = "12"
    variant: int = 1
    S: int = 20
    n_bar: int = 20
    starred: bool = False
    folds: int = 10
    repeats: int = 1
    seed: int = 0
    jobs: int = 1
    backend: str | None = None
    out: str = "fssvm-out"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not self.dataset or not Path(self.dataset).is_file():
            raise ValueError(f"dataset file {self.dataset!r} does not exist")
        self.B = [float(b) for b in _as_list(self.B)]
        self.C = [float(c) for c in _as_list(self.C)]
        if not self.B or not self.C:
            raise ValueError("--B and --C need at least one value")
        if self.command != "cv" and (len(self.B) > 1 or len(self.C) > 1):
            raise ValueError(f"{self.command} takes a single B and C; use cv for grids")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.scale not in ("none", "minmax"):
            raise ValueError("--scale must be none or minmax")
        if self.strategies not in ("1", "2", "12"):
            raise ValueError("--strategies must be 1, 2 or 12")
        if self.big_m <= 0 or self.jobs < 1 or self.repeats < 1:
            raise ValueError("--big-m must be positive, --jobs and --repeats at least 1")

    @property
    def ks(self) -> KsConfig:
        return KsConfig(bucket_fraction=self.bucket_fraction, per_milp_time_limit=self.milp_time_limit,
                        backend=self.backend)

    @property
    def limits(self) -> CvLimits:
        return CvLimits(time_limit=self.time_limit, big_m=self.big_m, scale=self.scale, ks=self.ks,
                        backend=self.backend)

    @property
    def hyper(self) -> Hyperparams:
        return Hyperparams.of(self.C[0], self.B[0])


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    # every default is None so that only flags given on the command line override the config file
    shared.add_argument("--config", help="YAML file with the same keys as the long flags")
    shared.add_argument("--dataset", help="CSV with a header row, or a sparse label idx:val file")
    shared.add_argument("--label-column", dest="label_column")
    shared.add_argument("--label-map", dest="label_map", help='raw-to-class map such as "0:-1,1:1"')
    shared.add_argument("--scale", choices=("none", "minmax"))
    shared.add_argument("--method", choices=METHODS)
    shared.add_argument("--B", dest="B", type=float, nargs="+", help="feature budget (a list for cv)")
    shared.add_argument("--C", dest="C", type=float, nargs="+", help="error penalty (a list for cv)")
    shared.add_argument("--big-m", dest="big_m", type=float)
    shared.add_argument("--time-limit", dest="time_limit", type=float, help="seconds per full MILP solve")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--jobs", type=int)
    shared.add_argument("--backend", choices=("simplex", "highs"))
    shared.add_argument("--out", help="output directory")
    shared.add_argument("-v", "--verbose", action="count", default=0)

    ks = argparse.ArgumentParser(add_help=False)
    ks.add_argument("--bucket-fraction", dest="bucket_fraction", type=float)
    ks.add_argument("--milp-time-limit", dest="milp_time_limit", type=float)

    parser = argparse.ArgumentParser(prog="fssvm", description="Budgeted feature-selection SVM solved as a MILP.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[shared], help="train one classifier")
    p = sub.add_parser("tighten", parents=[shared, ks], help="shrink the big-M bounds")
    p.add_argument("--strategies", choices=("1", "2", "12"))
    sub.add_parser("ks", parents=[shared, ks], help="Kernel Search heuristic")
    p = sub.add_parser("exact", parents=[shared, ks], help="semi-relaxed exact refinement")
    p.add_argument("--variant", type=int, choices=(1, 2, 3))
    p.add_argument("--S", dest="S", type=int)
    p.add_argument("--n-bar", dest="n_bar", type=int)
    p.add_argument("--starred", action="store_true", default=None)
    p.add_argument("--subproblem-time-limit", dest="subproblem_time_limit", type=float)
    p = sub.add_parser("cv", parents=[shared, ks], help="k-fold cross-validated grid")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int, help="fold plans seeded seed, seed+1, ...")
    sub.add_parser("oracle", parents=[shared], help="enumerate every affordable subset")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: expected a mapping at the top level")
        # sections such as "ks:" or "exact:" only group keys; they are flattened one level
        loaded = {k2: v2 for k, v in loaded.items() for k2, v2 in (v.items() if isinstance(v, dict) else [(k, v)])}
        known = set(RunConfig.__dataclass_fields__)
        unknown = set(loaded) - known
        if unknown:
            raise ValueError(f"{args.config}: unknown keys {sorted(unknown)}")
        values.update(loaded)
    for key, value in vars(args).items():
        if key in ("config", "verbose") or value is None:
            continue
        values[key] = value
    values["command"] = args.command
    if "dataset" not in values:
        raise ValueError("--dataset is required (flag or config key)")
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def load_dataset(cfg: RunConfig) -> Dataset:
    opts = IngestOptions(cfg.label_column) if cfg.label_map is None else \
        IngestOptions(cfg.label_column, parse_label_map(cfg.label_map))
    if Path(cfg.dataset).suffix in SPARSE_SUFFIXES:
        return load_sparse(cfg.dataset, options=opts)
    return load_csv(cfg.dataset, opts)


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _classifier_json(clf) -> dict:
    data = clf.to_dict()
    data["gap"] = float(clf.stats.get("gap_percent", 0.0))
    data["time"] = float(clf.stats.get("wall_time", 0.0))
    return data


def cmd_solve(cfg: RunConfig, d: Dataset, out: Path) -> int:
    d = scale_features(d, cfg.scale)
    clf = train(cfg.method, d, cfg.B[0], cfg.C[0], cfg.limits)
    _write_json(out / "classifier.json", _classifier_json(clf))
    print(f"{cfg.method} objective={clf.objective:.9g} selected={list(clf.selected)} "
          f"status={clf.stats.get('status', 'optimal')} gap={clf.stats.get('gap_percent', 0.0):.4g}%")
    return EXIT_OK


def cmd_tighten(cfg: RunConfig, d: Dataset, out: Path) -> int:
    d = scale_features(d, cfg.scale)
    rep = tighten(d, cfg.hyper, BoundsVector.default(d.n, cfg.big_m), cfg.strategies,
                  milp_time_limit=cfg.milp_time_limit, backend=cfg.backend)
    data = rep.to_dict()
    data.update(l=rep.bounds_after.l.tolist(), u=rep.bounds_after.u.tolist())
    _write_json(out / "tightening.json", data)
    print(f"delta_B before={rep.delta_b_before:.6g} after={rep.delta_b_after:.6g} UB={rep.ub_used:.9g} "
          f"LP={rep.lp_lb:.9g}")
    return EXIT_OK


def cmd_ks(cfg: RunConfig, d: Dataset, out: Path) -> int:
    d = scale_features(d, cfg.scale)
    clf, state = run_kernel_search(d, cfg.hyper, BoundsVector.default(d.n, cfg.big_m), cfg.ks)
    (out / "ks_state.json").write_text(state.to_json() + "\n", encoding="utf-8")
    _write_json(out / "classifier.json", _classifier_json(clf))
    print(f"ks UB={state.UB:.9g} |K|={len(state.kernel)} iterations={state.it} nodes={state.nodes}")
    return EXIT_OK


def cmd_exact(cfg: RunConfig, d: Dataset, out: Path) -> int:
    d = scale_features(d, cfg.scale)
    ecfg = ExactConfig(variant=cfg.variant, S=cfg.S, n_bar=cfg.n_bar, starred=cfg.starred,
                       per_subproblem_time_limit=cfg.subproblem_time_limit, ks=cfg.ks, backend=cfg.backend)
    clf, state = run_exact(d, cfg.hyper, ecfg, BoundsVector.default(d.n, cfg.big_m))
    state.write_history(out / "history.csv")
    _write_json(out / "exact_state.json", {"LB": state.LB, "UB": state.UB, "gap_percent": state.gap_percent,
                                           "iterations": state.it, "kernel": state.K,
                                           "termination": state.termination})
    _write_json(out / "classifier.json", _classifier_json(clf))
    print(f"exact variant={cfg.variant} LB={state.LB:.9g} UB={state.UB:.9g} gap={state.gap_percent:.4g}% "
          f"iterations={state.it} termination={state.termination}")
    return EXIT_OK if state.termination == "gap-closed" else EXIT_DEGRADED


def cmd_cv(cfg: RunConfig, d: Dataset, out: Path) -> int:
    results = []
    for r in range(cfg.repeats):
        folds = make_folds(d, cfg.folds, cfg.seed + r)
        results += run_cv(d, cfg.method, (cfg.B, cfg.C), folds, cfg.limits, cfg.jobs)
    write_results_csv(results, out / "results.csv")
    write_summary_csv(results, out / "summary.csv")
    write_plot_data(results, out / "plot_data.csv")
    cells: dict[tuple[float, float], list] = {}
    for res in results:
        cells.setdefault((res.B, res.C), []).append(res)
    summary = [{"B": B, "C": C, "avg_acc": float(np.mean([r.avg_acc for r in rs])),
                "avg_auc": float(np.mean([r.avg_auc for r in rs])),
                "avg_features": float(np.mean([r.avg_features for r in rs])),
                "degraded": any(r.degraded for r in rs)} for (B, C), rs in cells.items()]
    # same ordering as best_cell, applied to the averages over repeats
    top = min(summary, key=lambda s: (-s["avg_acc"], -s["avg_auc"], s["avg_features"]))
    _write_json(out / "best.json", {"method": cfg.method, "repeats": cfg.repeats, **top})
    for s in summary:
        print(f"{cfg.method} B={s['B']:g} C={s['C']:g} acc={100 * s['avg_acc']:.2f}% "
              f"auc={100 * s['avg_auc']:.2f}% features={s['avg_features']:.2f}"
              + (" DEGRADED" if s["degraded"] else ""))
    print(f"best B={top['B']:g} C={top['C']:g} acc={100 * top['avg_acc']:.2f}% auc={100 * top['avg_auc']:.2f}%")
    return EXIT_DEGRADED if any(s["degraded"] for s in summary) else EXIT_OK


def cmd_oracle(cfg: RunConfig, d: Dataset, out: Path) -> int:
    d = scale_features(d, cfg.scale)
    res = enumerate_optimum(d, cfg.hyper, BoundsVector.default(d.n, cfg.big_m),
                            backend=cfg.backend or "highs")
    _write_json(out / "oracle.json", {"objective": res.objective, "subset": list(res.subset),
                                      "w": res.w.tolist(), "b": res.b, "subsets_checked": res.subsets_checked})
    print(f"oracle objective={res.objective:.9g} subset={list(res.subset)} subsets={res.subsets_checked}")
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "tighten": cmd_tighten, "ks": cmd_ks, "exact": cmd_exact, "cv": cmd_cv,
            "oracle": cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError, yaml.YAMLError) as exc:
        print(f"fssvm: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.yaml", "w", encoding="utf-8") as fh:
        # an absolute dataset path makes the echo rerunnable from any directory
        yaml.safe_dump({**asdict(cfg), "dataset": str(Path(cfg.dataset).resolve())}, fh, sort_keys=False)
    try:
        d = load_dataset(cfg)
        return HANDLERS[cfg.command](cfg, d, out)
    except (DataError, SolveError, OracleGuardError, ValueError) as exc:
        print(f"fssvm {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
