from __future__ import annotations

import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from vsdsp.cli import main
from vsdsp.experiment import TRACE_HEADER

TOY = str(Path(__file__).parent / "data" / "toy.problem")
BROKEN = str(Path(__file__).parent / "data" / "broken.problem")
FAST = ["--ga-pop", "10", "--ga-gens", "3"]


def _run(tmp, *extra, method="dvw", out="out"):
    args = ["run", "--problem", TOY, "--method", method, "--init-size", "6", "--budget", "3", "--out", str(tmp / out)]
    return main([*args, *FAST, *extra])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_traces(tmp_path, capsys):
    assert _run(tmp_path, "--reps", "2", "--seed", "5") == 0
    out = tmp_path / "out"
    files = sorted(p.name for p in out.iterdir())
    assert files == ["dvw_cs_config.json", "dvw_cs_rep00.csv", "dvw_cs_rep01.csv", "dvw_cs_summary.json"]
    rows = _rows(out / "dvw_cs_rep00.csv")
    assert rows[0] == TRACE_HEADER
    assert len(rows) == 1 + 6 + 3
    assert [r[5] for r in rows[1:]] == [str(i) for i in range(1, 10)]
    assert [r[4] for r in rows[1:]] == ["0"] * 6 + ["1", "2", "3"]
    summary = json.loads((out / "dvw_cs_summary.json").read_text())
    assert summary["label"] == "dvw_cs" and len(summary["reps"]) == 2
    config = json.loads((out / "dvw_cs_config.json").read_text())
    assert config["seed"] == 5 and config["init_size"] == 6 and config["budget"] == 3
    assert "median" in capsys.readouterr().out


@pytest.mark.parametrize("method", ["io", "ba", "spw", "dvw"])
def test_byte_identical_reruns(tmp_path, method):
    assert _run(tmp_path, "--seed", "3", method=method, out="a") == 0
    assert _run(tmp_path, "--seed", "3", method=method, out="b") == 0
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_parallel_jobs_match_sequential(tmp_path):
    assert _run(tmp_path, "--reps", "2", "--jobs", "1", out="seq") == 0
    assert _run(tmp_path, "--reps", "2", "--jobs", "2", out="par") == 0
    for f in (tmp_path / "seq").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "par" / f.name).read_bytes()


def test_ba_label_and_a_column(tmp_path):
    assert _run(tmp_path, "--a", "3", method="ba") == 0
    rows = _rows(tmp_path / "out" / "ba_cs_a3_rep00.csv")
    assert {r[2] for r in rows[1:]} == {"3.0"}


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--problem", TOY, "--method", "nope"],
        ["run", "--problem", TOY],
        ["run", "--problem", "no_such_problem", "--method", "io"],
        ["run", "--problem", TOY, "--method", "io", "--budget", "-1"],
        ["run", "--problem", TOY, "--method", "io", "--init-size", "1"],
        ["run", "--problem", TOY, "--method", "io", "--t-ev", "h=0.1"],
        ["run", "--problem", TOY, "--method", "io", "--t-ev", "g=-1"],
        ["run", "--problem", TOY, "--method", "ba", "--a", "0"],
        ["run", "--problem", TOY, "--method", "io", "--reps", "0"],
        ["bogus"],
    ],
)
def test_configuration_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_bad_environment_value_exits_1(monkeypatch, capsys):
    monkeypatch.setenv("VSDSP_BUDGET", "many")
    assert main(["run", "--problem", TOY, "--method", "io"]) == 1


def test_runtime_failures_exit_2(tmp_path, capsys):
    argv = ["run", "--problem", BROKEN, "--method", "io", "--budget", "1", *FAST]
    assert main(argv) == 2
    assert "solver diverged" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--problem", TOY, "--method", "io", "--budget", "0", "--out", str(blocker / "sub")]) == 2


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("VSDSP_PROBLEM", TOY)
    monkeypatch.setenv("VSDSP_METHOD", "io")
    monkeypatch.setenv("VSDSP_BUDGET", "2")
    monkeypatch.setenv("VSDSP_INIT_SIZE", "5")
    monkeypatch.setenv("VSDSP_GA_POP", "10")
    monkeypatch.setenv("VSDSP_GA_GENS", "2")
    monkeypatch.setenv("VSDSP_T_EV", "g=0.01")
    assert main(["run", "--out", str(tmp_path / "env")]) == 0
    assert len(_rows(tmp_path / "env" / "io_cs_rep00.csv")) == 1 + 5 + 2
    config = json.loads((tmp_path / "env" / "io_cs_config.json").read_text())
    assert config["thresholds"] == {"g": 0.01}
    # flags win over the environment
    assert main(["run", "--budget", "1", "--out", str(tmp_path / "flag")]) == 0
    assert len(_rows(tmp_path / "flag" / "io_cs_rep00.csv")) == 1 + 5 + 1


def test_compare(tmp_path, capsys):
    assert _run(tmp_path, "--reps", "2", method="io", out="io") == 0
    assert _run(tmp_path, "--reps", "2", method="dvw", out="dvw") == 0
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "io"), str(tmp_path / "dvw"), "--reference", "0.0"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report["methods"]) == {"io_cs", "dvw_cs"}
    assert sorted(report["ranking"]) == ["dvw_cs", "io_cs"]
    entry = report["methods"]["dvw_cs"]
    curve = entry["median_curve"]
    assert list(curve) == [f"{10 * k}%" for k in range(1, 11)]
    assert curve["100%"]["evaluations"] == 9 and curve["10%"]["evaluations"] == 1
    values = [c["best_feasible"] for c in curve.values()]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert "median_evals_to_within_5pct" in entry


def test_compare_rejects_mismatched_protocols(tmp_path):
    assert _run(tmp_path, method="io", out="a") == 0
    assert main(["run", "--problem", TOY, "--method", "dvw", "--budget", "2", "--out", str(tmp_path / "b"), *FAST]) == 0
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 1
    assert main(["compare", str(tmp_path / "empty")]) == 1


def test_oracle_command(capsys):
    assert main(["oracle", "--problem", TOY, "--effort", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    # sub-problem 1 reaches 0 at x1=0.6, x2=0.5, z=0
    assert float(lines[1].rsplit(":", 1)[1]) == pytest.approx(0.0, abs=1e-6)


def test_console_script(tmp_path):
    env = dict(os.environ, PYTHONPATH=str(Path(__file__).parent))
    proc = subprocess.run(
        [sys.executable, "-m", "vsdsp.cli", "run", "--problem", TOY, "--method", "io", "--budget", "0"],
        env=env,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "vsdsp.cli", "run"], env=env, capture_output=True, text=True)
    assert proc.returncode == 1
