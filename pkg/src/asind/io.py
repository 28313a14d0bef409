"""File formats: trajectory CSV (+ JSON sidecar), model JSON (+ .eqs.txt).

Trajectory CSV: header ``t,node_0,...,node_{N-1}``, one row per sample.
The sidecar ``<stem>.meta.json`` records dt, origin and simulation metadata;
exact derivatives, when present, go to ``<stem>.deriv.csv`` in the same
layout. Floats are written with 17 significant digits so a round trip is
lossless.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .basis import load_library
from .dynamics import Trajectory, estimate_derivatives
from .identify import IdentifiedModel
from .sindy import SindyModel


class ParseError(ValueError):
    pass


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _sidecar(path: Path, kind: str) -> Path:
    return path.with_name(path.stem + f".{kind}")


def _write_matrix_csv(path: Path, times: np.ndarray, data: np.ndarray):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t"] + [f"node_{j}" for j in range(data.shape[1])])
        for t, row in zip(times, data):
            wr.writerow([fmt(t)] + [fmt(v) for v in row])


def _read_matrix_csv(path: Path):
    text = Path(path).read_text()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    if not header or header[0] != "t":
        raise ParseError(f"{path}: line 1: first column must be 't'")
    n = len(header) - 1
    for j, name in enumerate(header[1:]):
        if name != f"node_{j}":
            raise ParseError(f"{path}: line 1: missing column 'node_{j}' (found {name!r})")
    times, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != n + 1:
            raise ParseError(f"{path}: line {lineno}: expected {n + 1} fields, found {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as err:
            raise ParseError(f"{path}: line {lineno}: {err}") from None
        times.append(vals[0])
        rows.append(vals[1:])
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(times), np.array(rows)


def save_trajectory(traj: Trajectory, path, meta: dict | None = None):
    path = Path(path)
    _write_matrix_csv(path, traj.times, traj.states)
    if traj.derivatives is not None and traj.origin == "simulated-exact":
        _write_matrix_csv(_sidecar(path, "deriv.csv"), traj.times, traj.derivatives)
    info = {"dt": traj.dt, "t0": traj.t0, "origin": traj.origin, "n": traj.n, "steps": traj.steps}
    info.update(traj.meta)
    if meta:
        info.update(meta)
    _sidecar(path, "meta.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def load_trajectory(path, derivatives: bool = True) -> Trajectory:
    """Read a trajectory CSV.

    Without a sidecar, dt comes from the time column and the origin is
    'estimated'; missing derivatives are estimated when `derivatives` is set.
    """
    path = Path(path)
    times, states = _read_matrix_csv(path)
    meta_path = _sidecar(path, "meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    if "dt" in meta:
        dt = float(meta["dt"])
    else:
        if times.size < 2:
            raise ParseError(f"{path}: cannot infer dt from a single sample")
        steps = np.diff(times)
        dt = float(np.mean(steps))
        if not np.allclose(steps, dt, rtol=1e-6, atol=1e-12):
            raise ParseError(f"{path}: samples are not uniformly spaced in t")
    deriv_path = _sidecar(path, "deriv.csv")
    derivs, origin = None, "estimated"
    if deriv_path.exists() and meta.get("origin") == "simulated-exact":
        _, derivs = _read_matrix_csv(deriv_path)
        origin = "simulated-exact"
    extra = {k: v for k, v in meta.items() if k not in ("dt", "t0", "origin", "n", "steps")}
    traj = Trajectory(states, dt, derivs, origin=origin, t0=float(times[0]), meta=extra)
    if derivs is None and derivatives:
        traj = estimate_derivatives(traj)
    return traj


def model_to_dict(model, config: dict | None = None, history: dict | None = None) -> dict:
    if isinstance(model, SindyModel):
        d = {"method": "sindy", "order": model.order, "trig": model.trig,
             "feature_names": model.feature_names, "coef": model.coef.tolist(),
             "settings": model.settings}
    else:
        d = {"method": model.method, "library": model.library.keys,
             "basis_names": model.library.names, "w": model.w.tolist(),
             "a_hat": model.a_hat.tolist()}
    d["n"] = model.n
    if config is not None:
        d["config"] = config
    if history is not None:
        d["history"] = history
    return d


def model_from_dict(d: dict):
    method = d.get("method")
    if method == "sindy":
        return SindyModel(np.array(d["coef"], dtype=float), d["order"], d.get("trig", False),
                          settings=d.get("settings", {}))
    if method == "asind":
        return IdentifiedModel(np.array(d["w"], dtype=float), np.array(d["a_hat"], dtype=float),
                               load_library(d["library"]), method)
    raise ParseError(f"unknown model method {method!r}")


def save_model(model, path, config: dict | None = None, history: dict | None = None):
    """Write the model JSON and a sibling .eqs.txt equation listing."""
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model, config, history), indent=1) + "\n")
    path.with_suffix(".eqs.txt").write_text("\n".join(model.equations()) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
