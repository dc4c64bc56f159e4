import csv
import json

import numpy as np
import pytest
import yaml

from conftest import random_instance, rel_close
from fssvm.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from fssvm.data import Dataset


def _write_csv(path, d: Dataset) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(d.n)] + ["label"])
        for row, y in zip(d.x, d.y):
            w.writerow([repr(float(v)) for v in row] + [int(y)])
    return str(path)


@pytest.fixture
def toy_csv(tmp_path):
    return _write_csv(tmp_path / "toy.csv", Dataset("toy", np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([1, -1])))


@pytest.fixture
def small_csv(tmp_path):
    return _write_csv(tmp_path / "small.csv", random_instance(np.random.default_rng(17), 14, 5))


def _json(path):
    return json.loads(path.read_text())


def test_solve_l1_toy(toy_csv, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["solve", "--dataset", toy_csv, "--method", "l1-svm", "--out", str(out)]) == EXIT_OK
    assert "objective=1 " in capsys.readouterr().out
    clf = _json(out / "classifier.json")
    assert clf["objective"] == pytest.approx(1.0)
    assert {"w", "b", "selected", "objective", "gap", "time"} <= set(clf)


def test_solve_zero_budget(toy_csv, tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--dataset", toy_csv, "--B", "0", "--out", str(out)]) == EXIT_OK
    assert _json(out / "classifier.json")["selected"] == []


def test_solve_matches_oracle(small_csv, tmp_path):
    common = ["--dataset", small_csv, "--B", "2", "--C", "4", "--scale", "none"]
    assert main(["solve", *common, "--out", str(tmp_path / "s")]) == EXIT_OK
    assert main(["oracle", *common, "--out", str(tmp_path / "o")]) == EXIT_OK
    solved, oracle = _json(tmp_path / "s" / "classifier.json"), _json(tmp_path / "o" / "oracle.json")
    assert rel_close(solved["objective"], oracle["objective"])
    assert sorted(solved["selected"]) == oracle["subset"]


def test_config_file_and_flag_precedence(small_csv, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({"dataset": small_csv, "B": [3], "C": [1.0], "scale": "none",
                                   "ks": {"bucket_fraction": 0.5}}))
    out = tmp_path / "o"
    assert main(["ks", "--config", str(cfg), "--B", "1", "--out", str(out)]) == EXIT_OK
    echoed = yaml.safe_load((out / "config.yaml").read_text())
    assert echoed["B"] == [1.0] and echoed["bucket_fraction"] == 0.5 and echoed["scale"] == "none"
    assert len(_json(out / "classifier.json")["selected"]) <= 1
    # the echoed config alone reproduces the run
    again = tmp_path / "again"
    assert main(["ks", "--config", str(out / "config.yaml"), "--out", str(again)]) == EXIT_OK
    assert _json(again / "classifier.json")["objective"] == _json(out / "classifier.json")["objective"]


def test_tighten_prints_delta(small_csv, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["tighten", "--dataset", small_csv, "--B", "2", "--out", str(out)]) == EXIT_OK
    assert "delta_B before=2000" in capsys.readouterr().out
    rep = _json(out / "tightening.json")
    assert rep["delta_b_after"] < rep["delta_b_before"]
    assert len(rep["u"]) == len(rep["l"]) == 5


def test_ks_prints_ub(small_csv, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["ks", "--dataset", small_csv, "--B", "2", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "UB=" in text and "|K|=" in text
    assert "trace" in _json(out / "ks_state.json")


def test_exact_writes_history(small_csv, tmp_path):
    out = tmp_path / "o"
    code = main(["exact", "--dataset", small_csv, "--B", "2", "--variant", "3", "--n-bar", "2", "--out", str(out)])
    assert code == EXIT_OK
    state = _json(out / "exact_state.json")
    assert state["termination"] == "gap-closed" and state["gap_percent"] <= 0.01
    with open(out / "history.csv") as fh:
        assert next(csv.reader(fh)) == ["iteration", "z_LB", "z_UB", "LB", "UB", "kernel_size", "seconds"]


def test_cv_grid(small_csv, tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["cv", "--dataset", small_csv, "--method", "fs-svm", "--B", "1", "2", "--C", "1", "4",
                 "--folds", "2", "--repeats", "2", "--out", str(out)])
    assert code == EXIT_OK
    with open(out / "results.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4 * 2 * 2
    assert (out / "summary.csv").exists() and (out / "plot_data.csv").exists()
    best = _json(out / "best.json")
    assert best["B"] in (1.0, 2.0) and best["repeats"] == 2
    assert "best B=" in capsys.readouterr().out


def test_oracle_guard(tmp_path, capsys):
    path = _write_csv(tmp_path / "wide.csv", random_instance(np.random.default_rng(0), 6, 21))
    assert main(["oracle", "--dataset", path, "--out", str(tmp_path / "o")]) == EXIT_FAILED
    assert "refuses" in capsys.readouterr().err


def test_usage_errors(toy_csv, tmp_path, capsys):
    assert main(["solve", "--dataset", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["solve", "--dataset", toy_csv, "--B", "1", "2", "--out", str(tmp_path)]) == EXIT_USAGE
    bad = tmp_path / "bad.yaml"
    bad.write_text("dataset: x\nbogus: 1\n")
    assert main(["solve", "--config", str(bad)]) == EXIT_USAGE
    assert "config error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["solve", "--scale", "zscore"])


def test_bad_label_is_failure(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("f1,label\n1,yes\n2,no\n")
    assert main(["solve", "--dataset", str(path), "--out", str(tmp_path / "o")]) == EXIT_FAILED
    code = main(["solve", "--dataset", str(path), "--label-map", "yes:1,no:-1", "--method", "l1-svm",
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_OK


def test_sparse_input(tmp_path):
    path = tmp_path / "toy.svm"
    path.write_text("1 1:1\n-1 1:-1\n")
    assert main(["solve", "--dataset", str(path), "--method", "l1-svm", "--out", str(tmp_path / "o")]) == EXIT_OK
