import json

import pytest

from asind import harness
from asind.harness import ConfigError, config_from_dict, load_config, run_experiment, run_grid

SMALL = {"network": {"n": 6, "er_p": 0.4}, "train_steps": 80, "horizon": 10, "seeds": [0, 1],
         "asind": {"outer_max_iters": 15}}


def small_cfg(tmp_path, **extra):
    d = json.loads(json.dumps(SMALL))
    d["output_dir"] = str(tmp_path / "out")
    d.update(extra)
    return config_from_dict(d)


def test_unknown_keys_are_errors():
    with pytest.raises(ConfigError, match="horizn"):
        config_from_dict({"horizn": 5})
    with pytest.raises(ConfigError, match="asind.rho"):
        config_from_dict({"asind": {"rho": 5}})
    with pytest.raises(ConfigError, match="dynamics parameter"):
        config_from_dict({"dynamics": {"model": "sis", "params": {"beta": 1}}})


@pytest.mark.parametrize("bad", [{"horizon": 0}, {"seeds": []}, {"method": "lasso"},
                                 {"network": {"kind": "lattice"}}, {"dynamics": {"model": "heat"}}])
def test_invalid_values(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_json_error_has_position(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "horizon": 10,\n  "seeds": [0,\n}\n')
    with pytest.raises(ConfigError, match=r"line 4 column 1"):
        load_config(p)


def test_missing_parent_fails_before_work(tmp_path):
    cfg = small_cfg(tmp_path, output_dir=str(tmp_path / "nope" / "out"))
    with pytest.raises(FileNotFoundError):
        run_experiment(cfg)


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUTPUT_ROOT_ENV, str(tmp_path))
    assert harness.resolve_output_dir("res") == tmp_path / "res"


def test_run_is_deterministic_and_complete(tmp_path):
    cfg = small_cfg(tmp_path)
    rows = run_experiment(cfg)
    assert len(rows) == 4 and {r["method"] for r in rows} == {"asind", "sindy"}
    out = tmp_path / "out"
    first = {f: (out / f).read_bytes() for f in ("results.csv", "summary.csv",
                                                 "per_step_errors.csv", "table.txt")}
    run_experiment(cfg)
    for f, data in first.items():
        assert (out / f).read_bytes() == data, f
    header = (out / "results.csv").read_text().splitlines()[0].split(",")
    assert header[:8] == ["model", "network", "method", "seed", "rmse", "mape", "jaccard",
                          "diverged"]
    assert (out / "timing.csv").read_text().startswith("model,network,method,seed,wall_time")
    assert len(list((out / "models").glob("*.json"))) == 4


def test_single_cell_grid_matches_experiment(tmp_path):
    cfg = small_cfg(tmp_path, seeds=[0])
    run_experiment(cfg)
    a = (tmp_path / "out" / "results.csv").read_bytes()
    run_grid(cfg, ["sis"], ["er"], ["asind", "sindy"], output_dir=tmp_path / "grid")
    assert (tmp_path / "grid" / "results.csv").read_bytes() == a


def test_grid_rejects_unknown_model(tmp_path):
    with pytest.raises(ValueError, match="kuramoto"):
        run_grid(small_cfg(tmp_path), ["heat"], ["er"], ["asind"])
    with pytest.raises(ConfigError, match="valid names"):
        run_grid(small_cfg(tmp_path), ["sis"], ["er"], ["lasso"])


def test_failure_isolated_to_row(tmp_path):
    # 5 samples cannot determine 9 coefficients; the run continues
    cfg = small_cfg(tmp_path, train_steps=5, seeds=[0])
    rows = run_experiment(cfg)
    asind = [r for r in rows if r["method"] == "asind"][0]
    assert asind["diverged"] == 1 and "coefficients" in asind["error"]
    assert any(r["method"] == "sindy" for r in rows)


def test_summary_marks_divergence():
    rows = [{"model": "sis", "network": "erdos-renyi", "method": "sindy", "rmse": "inf",
             "mape": "inf", "jaccard": 10.0, "diverged": 1},
            {"model": "sis", "network": "erdos-renyi", "method": "sindy", "rmse": 0.1,
             "mape": 1.0, "jaccard": 20.0, "diverged": 0}]
    s = harness.summarize(rows)[0]
    assert s["rmse"] == float("inf") and s["diverged"] == 1 and s["jaccard"] == 15.0
    assert "inf" in harness.render_tables([s])


def test_sis_er_seed0_desk_band(tmp_path):
    cfg = config_from_dict({"method": "asind", "seeds": [0], "output_dir": str(tmp_path / "o")})
    row = run_experiment(cfg)[0]
    assert float(row["rmse"]) < 0.05 and float(row["mape"]) < 5


@pytest.mark.parametrize("name", ["default.json", "quick.json"])
def test_shipped_configs_load(name):
    from pathlib import Path
    load_config(Path(__file__).parent.parent / "configs" / name)
