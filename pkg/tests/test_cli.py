import csv
import subprocess
import sys

import pytest

from adaptive_convex.cli import main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_analyze(tmp_path, capsys):
    assert main(["analyze", "--function", "quadratic:2,0,0", "--eps", "0.01", "0.001"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("epsilon,t_left")
    assert len(lines) == 3
    assert float(lines[1].split(",")[3]) == pytest.approx(9.0, rel=1e-6)


def test_pack(tmp_path):
    out, alloc = tmp_path / "p.csv", tmp_path / "a.csv"
    assert main(["pack", "--function", "quadratic:2,0,0", "--eps", "0.01",
                 "--out", str(out), "--alloc-out", str(alloc)]) == 0
    assert len(_rows(out)) == 4
    rows = _rows(alloc)
    assert rows[0] == ["x", "n_samples"] and len(rows) == 12 and rows[1][1] == "3761"


def test_run_and_slopes(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("function = hinge\nmethods = passive-dyadic\nbudgets = 20, 40, 80\n"
                   "trials = 2\ngrid_points = 501\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["run", "--config", str(cfg), "--out", str(path), "--seed", "5", "--no-wall-time"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _rows(a)
    assert rows[0] == ["method", "budget", "trial", "seed", "sup_error_full",
                       "sup_error_interior", "wall_time_ms"]
    assert len(rows) == 7
    assert main(["slopes", str(a)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "method,slope" and out[1].startswith("passive-dyadic,")


def test_bad_config_reports_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "adaptive_convex", "analyze", "--eps", "0.05"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.startswith("epsilon,")
