import json
import subprocess
import sys

import numpy as np
import pytest

from lrkernel.cli import main, open_dataset
from lrkernel.dataset import write_dataset
from lrkernel.harness import read_results
from lrkernel.spectral import load_cache
from lrkernel.splits import load_splits

SBM = "sbm:30,30,30:0.3:0.03:6:0"


def run(*argv):
    assert main(list(argv)) == 0


def strip_wall(rows):
    return [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows]


def test_train_appends_rows(tmp_path, capsys):
    out = tmp_path / "r.csv"
    run("train", "--data", SBM, "--model", "kernel", "--kernel", "rbf", "--gamma", "0.1",
        "--epochs", "20", "--seed", "0-2", "--out", str(out))
    rows = read_results(out)
    assert [r["seed"] for r in rows] == [0, 1, 2]
    assert rows[0]["kernel"] == "gaussian_rbf" and rows[0]["gamma"] == 0.1
    assert "seed=2" in capsys.readouterr().out


def test_cli_is_deterministic(tmp_path):
    args = ["validate", "--data", SBM, "--model", "lrkernel", "--kernel", "id,sobu",
            "--gamma", "1", "--trunc", "0,0.5", "--lr", "0.01", "--wd", "0",
            "--epochs", "15", "--seeds", "0-1"]
    run(*args, "--out", str(tmp_path / "a.csv"))
    run(*args, "--out", str(tmp_path / "b.csv"))
    a, b = read_results(tmp_path / "a.csv"), read_results(tmp_path / "b.csv")
    assert len(a) == 8 and strip_wall(a) == strip_wall(b)


def test_dataset_directory_and_splits_file(tmp_path):
    ds = open_dataset(SBM)
    write_dataset(ds, tmp_path / "ds")
    run("splits", "gen", "--data", str(tmp_path / "ds"), "--kind", "dense",
        "--seeds", "0-3", "--out", str(tmp_path / "s.json"))
    splits = load_splits(tmp_path / "s.json", ds)
    assert len(splits) == 4 and splits[0].kind == "dense"
    run("train", "--data", str(tmp_path / "ds"), "--model", "plin", "--repr", "nadj",
        "--splits-file", str(tmp_path / "s.json"), "--seed", "1,3", "--epochs", "5",
        "--out", str(tmp_path / "r.csv"))
    rows = read_results(tmp_path / "r.csv")
    assert [r["seed"] for r in rows] == [1, 3] and {r["split"] for r in rows} == {"dense"}


def test_spectral_cache_command(tmp_path):
    run("spectral", "cache", "--data", SBM, "--repr", "lap", "--trunc", "0.5",
        "--out", str(tmp_path / "c.spec"))
    sys_ = load_cache(tmp_path / "c.spec")
    assert sys_.n == 90 and sys_.r == 45


def test_ablate_and_report(tmp_path, capsys):
    out = tmp_path / "r.csv"
    common = ["--data", SBM, "--lr", "0.01", "--wd", "0", "--gamma", "1", "--epochs", "10",
              "--seeds", "0-1", "--out", str(out)]
    run("ablate", "kernel", *common)
    assert capsys.readouterr().out.count("*") == 1
    run("ablate", "repr", *common)
    assert "adjacency - laplacian" in capsys.readouterr().out
    run("ablate", "trunc", *common, "--kernel", "lin", "--factors", "0,0.5")
    assert "trunc=0.50" in capsys.readouterr().out
    run("report", "--results", str(out), "--format", "markdown",
        "--group-by", "dataset,model,kernel", "--out", str(tmp_path / "t.md"))
    text = (tmp_path / "t.md").read_text()
    assert "| model / kernel | sbm |" in text
    run("report", "--results", str(out), "--format", "csv")
    assert capsys.readouterr().out.startswith("dataset,model,repr")


def test_audit_command(tmp_path, capsys):
    out = tmp_path / "r.csv"
    run("audit-splits", "--data", SBM, "--seeds", "0-1", "--epochs", "5", "--out", str(out),
        "--manifest", str(tmp_path / "m.json"))
    printed = capsys.readouterr().out
    assert "balanced" in printed and "dense" in printed
    assert len(json.loads((tmp_path / "m.json").read_text())["runs"]) == 8


def test_summary_and_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lrkernel", "summary", "--data", SBM],
                          capture_output=True, text=True, check=True)
    stats = json.loads(proc.stdout)
    assert stats["nodes"] == 90 and stats["classes"] == 3


def test_bad_flag_values():
    with pytest.raises(SystemExit):
        main(["train", "--data", SBM, "--kernel", "poly"])
    with pytest.raises(SystemExit):
        main(["train", "--data", SBM, "--repr", "rw"])
