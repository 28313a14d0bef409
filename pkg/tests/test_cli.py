import json
import subprocess
import sys

import pytest

from asind.cli import main


def test_pipeline(tmp_path, capsys):
    traj = tmp_path / "sis.csv"
    assert main(["simulate", "--model", "sis", "--n", "5", "--steps", "120", "--seed", "2",
                 "--out", str(traj)]) == 0
    assert (tmp_path / "sis.adjacency.csv").exists()
    model = tmp_path / "m.json"
    assert main(["fit", "--traj", str(traj), "--out", str(model)]) == 0
    assert "dx_0/dt" in capsys.readouterr().out
    assert main(["fit", "--traj", str(traj), "--method", "sindy",
                 "--out", str(tmp_path / "s.json")]) == 0
    pred = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--x0-from", str(traj), "--steps", "10",
                 "--out", str(pred)]) == 0
    capsys.readouterr()
    assert main(["eval", "--pred", str(pred), "--truth", str(pred), "--model", str(model),
                 "--adjacency", str(tmp_path / "sis.adjacency.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rmse"] == 0 and 0 <= report["jaccard"] <= 100


def test_grid_subcommand(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"network": {"n": 5}, "train_steps": 60, "horizon": 5,
                               "asind": {"outer_max_iters": 5}}))
    assert main(["grid", "--config", str(cfg), "--models", "sis", "--networks", "er",
                 "--seed", "0", "--out", str(tmp_path / "g")]) == 0
    assert "100-step prediction" in capsys.readouterr().out
    rows = (tmp_path / "g" / "results.csv").read_text().splitlines()
    assert len(rows) == 3


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text('{"unknown": 1}')
    assert main(["grid", "--config", str(bad)]) == 2
    assert "unknown" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "asind.cli", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "reproduce-tables" in out.stdout
