"""Experiment runner: network -> simulation -> fit -> 100-step evaluation.

A run is fully determined by its config and seed. Outputs that must be
reproducible byte-for-byte (results.csv, summary.csv, per_step_errors.csv,
table.txt, models/) never contain timings; wall-clock times go to timing.csv.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .basis import default_library, load_library
from .dynamics import (MODELS, DivergenceError, DynamicsSpec, canonical_model, default_initial_state,
                       default_spec, estimate_derivatives, integrate_rk4)
from .identify import AsindConfig, fit
from .io import save_model
from .metrics import MetricsReport, evaluate_run
from .netgen import KINDS, NetworkConfig, canonical_kind, generate
from .sindy import fit_sindy

log = logging.getLogger(__name__)

METHODS = ("asind", "sindy")
OUTPUT_ROOT_ENV = "ASIND_OUTPUT_ROOT"
RESULT_FIELDS = ["model", "network", "method", "seed", "rmse", "mape", "jaccard", "diverged",
                 "outer_iters", "descent_violations", "error"]
SHORT = {"erdos-renyi": "ER", "watts-strogatz": "WS", "barabasi-albert": "BA",
         "kuramoto": "Kuramoto", "sis": "SIS", "lotka-volterra": "LV", "michaelis-menten": "MM"}


class ConfigError(ValueError):
    pass


@dataclass
class DynamicsSettings:
    model: str = "sis"
    # overrides for DynamicsSpec fields: omega, delta, gamma, alpha, theta, c, h
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.model = canonical_model(self.model)
        bad = set(self.params) - {"omega", "delta", "gamma", "alpha", "theta", "c", "h"}
        if bad:
            raise ConfigError(f"unknown dynamics parameter(s): {sorted(bad)}")


@dataclass
class SindySettings:
    order: int = 2
    threshold: float = 0.05
    ridge: float = 1e-6
    max_rounds: int = 20
    trig: bool = False


@dataclass
class ExperimentConfig:
    dynamics: DynamicsSettings = field(default_factory=DynamicsSettings)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    method: str = "both"
    asind: AsindConfig = field(default_factory=AsindConfig)
    sindy: SindySettings = field(default_factory=SindySettings)
    library: dict | None = None  # {"self": [...], "pair": [...]}; default dictionary if None
    train_steps: int = 500
    horizon: int = 100
    dt: float = 0.01
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    output_dir: str = "results"
    force_estimated_derivatives: bool = False
    save_models: bool = True

    def __post_init__(self):
        if self.method not in METHODS + ("both",):
            raise ConfigError(f"method must be one of asind, sindy, both; got {self.method!r}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be a nonempty list")
        if self.train_steps < 3:
            raise ConfigError("train_steps must be >= 3")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")

    @property
    def methods(self) -> list[str]:
        return list(METHODS) if self.method == "both" else [self.method]

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"dynamics": DynamicsSettings, "network": NetworkConfig, "asind": AsindConfig,
             "sindy": SindySettings}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")
    kwargs = {}
    for k, v in data.items():
        sub = _SECTIONS.get(k) if not where else None
        kwargs[k] = _build(sub, v, k) if sub else v
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where or 'config'}: {err}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    return config_from_dict(data)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    d = cfg.to_dict()
    for k, v in kw.items():
        if v is None:
            continue
        if k not in d:
            raise ConfigError(f"unknown config key: {k}")
        d[k] = v
    return config_from_dict(d)


def resolve_output_dir(output_dir) -> Path:
    out = Path(output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    if not out.parent.exists():
        raise FileNotFoundError(f"parent of output directory does not exist: {out.parent}")
    return out


def make_spec(cfg: ExperimentConfig, rng: np.random.Generator) -> DynamicsSpec:
    n = cfg.network.n
    spec = default_spec(cfg.dynamics.model, n, rng)
    if cfg.dynamics.params:
        d = spec.to_dict()
        d.update(cfg.dynamics.params)
        spec = DynamicsSpec.from_dict(d)
    return spec


def make_library(cfg: ExperimentConfig, spec: DynamicsSpec):
    if cfg.library is not None:
        return load_library(cfg.library)
    return default_library(spec.h)


def simulate(cfg: ExperimentConfig, seed: int):
    """Ground truth for one seed: (spec, A, full trajectory)."""
    rng = np.random.default_rng(seed)
    a = generate(cfg.network, seed)
    spec = make_spec(cfg, rng)
    x0 = default_initial_state(spec.model, spec.n, rng)
    full = integrate_rk4(spec, a, x0, cfg.dt, cfg.train_steps - 1 + cfg.horizon)
    if spec.model == "sis" and (full.states.min() < 0 or full.states.max() > 1):
        log.warning("seed %d: SIS trajectory left [0, 1]", seed)
    full.meta.update(model=spec.model, network=cfg.network.kind, seed=seed)
    return spec, a, full


def _cell_name(model, network, method, seed):
    return f"{model}_{SHORT[network]}_{method}_s{seed}"


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: Path | None = None) -> list[dict]:
    """Simulate once, then fit and score every configured method."""
    rows = []
    base = {"model": cfg.dynamics.model, "network": cfg.network.kind, "seed": seed}
    try:
        spec, a, full = simulate(cfg, seed)
    except Exception as err:  # isolate the failure to this seed
        return [dict(base, method=m, error=f"simulation: {err}") for m in cfg.methods]
    train = full.slice(0, cfg.train_steps)
    if cfg.force_estimated_derivatives or train.derivatives is None:
        train = estimate_derivatives(dataclasses.replace(train, derivatives=None))
    split = cfg.train_steps - 1
    truth = full.slice(split)
    for method in cfg.methods:
        row = dict(base, method=method)
        t0 = time.perf_counter()
        try:
            history = None
            if method == "asind":
                model, state = fit(train, make_library(cfg, spec), cfg.asind, seed)
                row.update(outer_iters=state.iteration,
                           descent_violations=len(state.descent_violations()))
                history = state.to_dict()
                jtol = cfg.asind.threshold_a
            else:
                s = cfg.sindy
                model = fit_sindy(train, s.order, s.threshold, s.ridge, s.max_rounds, s.trig)
                jtol = 0.0
            report = evaluate_run(model, spec, a, full.states[split], cfg.dt, cfg.horizon,
                                  jaccard_tol=jtol, truth=truth)
            row.update(report.row())
            row["_report"] = report
            if out_dir is not None and cfg.save_models:
                (out_dir / "models").mkdir(parents=True, exist_ok=True)
                save_model(model, out_dir / "models" / (_cell_name(spec.model, cfg.network.kind,
                                                                   method, seed) + ".json"),
                           config=cfg.asind.to_dict() if method == "asind" else asdict(cfg.sindy),
                           history=history)
        except (DivergenceError, ValueError, np.linalg.LinAlgError) as err:
            row.update(rmse="inf", mape="inf", diverged=1, error=str(err))
        row["wall_time"] = time.perf_counter() - t0
        rows.append(row)
    return rows


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6g}"
    return "" if v is None else str(v)


def _write_csv(path: Path, fields, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(fields)
        for r in rows:
            wr.writerow([_fmt(r.get(k)) for k in fields])


def _num(v):
    return math.inf if v in ("inf", None, "") else float(v)


def summarize(rows: list[dict]) -> list[dict]:
    """Per-cell means over seeds; failed or diverged seeds make the mean inf."""
    cells = {}
    for r in rows:
        cells.setdefault((r["model"], r["network"], r["method"]), []).append(r)
    out = []
    for (model, network, method), rs in cells.items():
        rm = [_num(r.get("rmse")) for r in rs]
        mp = [_num(r.get("mape")) for r in rs]
        jc = [float(r["jaccard"]) for r in rs if r.get("jaccard") not in (None, "")]
        out.append({"model": model, "network": network, "method": method, "seeds": len(rs),
                    "rmse": float(np.mean(rm)), "mape": float(np.mean(mp)),
                    "rmse_std": float(np.std(rm)) if all(map(math.isfinite, rm)) else math.inf,
                    "jaccard": float(np.mean(jc)) if jc else math.nan,
                    "diverged": sum(int(r.get("diverged") or 0) for r in rs)})
    return out


def render_tables(summary: list[dict]) -> str:
    """Text tables laid out like the prediction and Jaccard tables (seed means)."""
    models = [m for m in MODELS if any(s["model"] == m for s in summary)]
    nets = [k for k in KINDS if any(s["network"] == k for s in summary)]
    methods = [m for m in ("sindy", "asind") if any(s["method"] == m for s in summary)]
    cell = {(s["model"], s["network"], s["method"]): s for s in summary}

    def num(v, pct=False):
        if not math.isfinite(v):
            return "inf" if v > 0 else "n/a"
        return f"{v:.2f}%" if pct else f"{v:.4f}"

    lines = ["100-step prediction (mean over seeds)", ""]
    head = f"{'':10s} {'':6s}" + "".join(f" | {SHORT[k] + ' RMSE':>14s} {SHORT[k] + ' MAPE':>14s}"
                                          for k in nets)
    lines += [head, "-" * len(head)]
    for m in models:
        for meth in methods:
            row = f"{SHORT[m]:10s} {meth.upper():6s}"
            for k in nets:
                s = cell.get((m, k, meth))
                row += " | " + (f"{num(s['rmse']):>14s} {num(s['mape'], True):>14s}" if s
                                else f"{'-':>14s} {'-':>14s}")
            lines.append(row)
    lines += ["", "Jaccard index J(A, A_hat) of the ASIND network (mean over seeds)", ""]
    head = f"{'':10s}" + "".join(f" | {SHORT[k]:>8s}" for k in nets)
    lines += [head, "-" * len(head)]
    for m in models:
        row = f"{SHORT[m]:10s}"
        for k in nets:
            s = cell.get((m, k, "asind"))
            row += " | " + (f"{s['jaccard']:7.2f}%" if s else f"{'-':>8s}")
        lines.append(row)
    return "\n".join(lines) + "\n"


def _task(args):
    cfg_dict, seed, out_dir = args
    cfg = config_from_dict(cfg_dict)
    return run_seed(cfg, seed, Path(out_dir) if out_dir else None)


def _write_outputs(out: Path, rows: list[dict]):
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", RESULT_FIELDS, rows)
    _write_csv(out / "timing.csv", ["model", "network", "method", "seed", "wall_time"], rows)
    summary = summarize(rows)
    _write_csv(out / "summary.csv", ["model", "network", "method", "seeds", "rmse", "rmse_std",
                                     "mape", "jaccard", "diverged"], summary)
    (out / "table.txt").write_text(render_tables(summary))
    steps = []
    for r in rows:
        rep = r.get("_report")
        if rep is not None and rep.per_step_errors is not None:
            for k, e in enumerate(rep.per_step_errors, start=1):
                steps.append({**{f: r[f] for f in ("model", "network", "method", "seed")},
                              "step": k, "rmse": float(e)})
    _write_csv(out / "per_step_errors.csv", ["model", "network", "method", "seed", "step", "rmse"],
               steps)
    details = [{**{f: r.get(f) for f in RESULT_FIELDS if f in r},
                "report": r["_report"].to_dict() if r.get("_report") else None} for r in rows]
    (out / "details.json").write_text(json.dumps(details, indent=1, default=_fmt) + "\n")
    return summary


def run_grid(base_cfg: ExperimentConfig, models, networks, methods, threads: int = 1,
             output_dir=None) -> list[dict]:
    """Run every (model, network) cell for all seeds and the listed methods.

    Returns the combined result rows; files are written under output_dir
    (default base_cfg.output_dir).
    """
    if not models or not networks or not methods:
        raise ConfigError("models, networks and methods must be nonempty")
    models = [canonical_model(m) for m in models]
    networks = [canonical_kind(k) for k in networks]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {bad}; valid names: {', '.join(METHODS)}")
    out = resolve_output_dir(output_dir or base_cfg.output_dir)
    out.mkdir(exist_ok=True)
    tasks = []
    for model in models:
        for net in networks:
            d = base_cfg.to_dict()
            d["dynamics"]["model"] = model
            d["network"]["kind"] = net
            d["method"] = methods[0] if len(set(methods)) == 1 else "both"
            for seed in base_cfg.seeds:
                tasks.append((d, seed, str(out)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_task, tasks))
    else:
        chunks = [_task(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    _write_outputs(out, rows)
    return rows


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    return run_grid(cfg, [cfg.dynamics.model], [cfg.network.kind], cfg.methods, threads)


GRID_MODELS = list(MODELS)
GRID_NETWORKS = list(KINDS)


def reproduce_tables(base_cfg: ExperimentConfig | None = None, threads: int = 1,
                     output_dir=None) -> list[dict]:
    """The full grid: four models x three networks x both methods."""
    cfg = base_cfg or ExperimentConfig()
    return run_grid(cfg, GRID_MODELS, GRID_NETWORKS, list(METHODS), threads, output_dir)
