"""Command line entry point: ``asind <subcommand> ...``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .basis import default_library, load_library
from .dynamics import estimate_derivatives
from .identify import fit, predict
from .io import load_model, load_trajectory, save_model, save_trajectory
from .metrics import jaccard, mape, rmse
from .netgen import AdjacencyMatrix
from .sindy import fit_sindy, predict_sindy


def _load_cfg(path) -> harness.ExperimentConfig:
    return harness.load_config(path) if path else harness.ExperimentConfig()


def cmd_simulate(args):
    cfg = _load_cfg(args.config)
    d = cfg.to_dict()
    if args.model:
        d["dynamics"]["model"] = args.model
    if args.network:
        d["network"]["kind"] = args.network
    if args.n:
        d["network"]["n"] = args.n
        d["network"]["ws_k"] = min(d["network"]["ws_k"], args.n - 1 - (args.n - 1) % 2)
    if args.dt:
        d["dt"] = args.dt
    if args.steps:
        d["train_steps"], d["horizon"] = args.steps, 1
    cfg = harness.config_from_dict(d)
    spec, a, full = harness.simulate(cfg, args.seed)
    if args.steps:
        full = full.slice(0, args.steps)
    out = Path(args.out)
    save_trajectory(full, out, meta={"params": spec.to_dict(), "dt": cfg.dt})
    a.save(out.with_name(out.stem + ".adjacency.csv"))
    print(f"wrote {out} ({full.steps} samples, {full.n} nodes)")


def cmd_fit(args):
    traj = load_trajectory(args.traj)
    if args.estimate:
        traj = estimate_derivatives(traj)
    if args.method == "sindy":
        s = _load_cfg(args.config).sindy
        model = fit_sindy(traj, s.order, s.threshold, s.ridge, s.max_rounds, s.trig)
        save_model(model, args.out, config=dataclasses.asdict(s))
    else:
        cfg = _load_cfg(args.config).asind
        h = traj.meta.get("params", {}).get("h", 2.0)
        lib = load_library(args.library) if args.library else default_library(h)
        model, state = fit(traj, lib, cfg, args.seed)
        save_model(model, args.out, config=cfg.to_dict(), history=state.to_dict())
        if state.warnings:
            logging.info("%d solver warnings", len(state.warnings))
    print("\n".join(model.equations()))


def cmd_predict(args):
    model = load_model(args.model)
    if args.x0_from:
        x0 = load_trajectory(args.x0_from, derivatives=False).states[-1]
    else:
        x0 = np.array(json.loads(args.x0), dtype=float)
    roll = predict_sindy if model.method == "sindy" else predict
    traj = roll(model, x0, args.dt, args.steps)
    save_trajectory(traj, args.out, meta={"method": model.method})
    print(f"wrote {args.out}")


def cmd_eval(args):
    pred = load_trajectory(args.pred, derivatives=False).states
    truth = load_trajectory(args.truth, derivatives=False).states
    if args.skip_first:
        pred, truth = pred[1:], truth[1:]
    k = min(len(pred), len(truth)) if args.align else None
    if k:
        pred, truth = pred[:k], truth[:k]
    report = {"rmse": rmse(pred, truth), "mape": mape(pred, truth, args.eps)}
    if args.model and args.adjacency:
        model = load_model(args.model)
        a = AdjacencyMatrix.from_csv(Path(args.adjacency).read_text())
        a_hat = model.a_hat if hasattr(model, "a_hat") else model.implied_adjacency()
        report["jaccard"] = jaccard(a, a_hat, args.jaccard_tol)
    print(json.dumps(report, indent=2))


def _grid_cfg(args) -> harness.ExperimentConfig:
    cfg = _load_cfg(args.config)
    return harness.with_overrides(cfg, seeds=[args.seed] if args.seed is not None else args.seeds,
                                  horizon=args.horizon, output_dir=args.out,
                                  method=getattr(args, "method", None))


def cmd_grid(args):
    cfg = _grid_cfg(args)
    methods = args.methods or cfg.methods
    harness.run_grid(cfg, args.models, args.networks, methods, args.threads)
    out = harness.resolve_output_dir(cfg.output_dir)
    print((out / "table.txt").read_text())


def cmd_reproduce(args):
    cfg = _grid_cfg(args)
    harness.reproduce_tables(cfg, args.threads)
    out = harness.resolve_output_dir(cfg.output_dir)
    print((out / "table.txt").read_text())


def _int_list(text):
    return [int(v) for v in text.split(",")]


def _str_list(text):
    return [v for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asind", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a ground-truth trajectory")
    s.add_argument("--config")
    s.add_argument("--model")
    s.add_argument("--network")
    s.add_argument("--n", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--steps", type=int, help="number of samples to write")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="identify a model from a trajectory CSV")
    s.add_argument("--traj", required=True)
    s.add_argument("--method", choices=harness.METHODS, default="asind")
    s.add_argument("--config")
    s.add_argument("--library", help="JSON file with 'self' and 'pair' basis keys")
    s.add_argument("--estimate", action="store_true", help="force finite-difference derivatives")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="roll out a fitted model")
    s.add_argument("--model", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--x0-from", help="trajectory CSV whose last row is the start state")
    g.add_argument("--x0", help="JSON list")
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="score a prediction against ground truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--skip-first", action="store_true", help="drop the shared start sample")
    s.add_argument("--align", action="store_true", help="truncate to the shorter series")
    s.add_argument("--eps", type=float, default=1e-8)
    s.add_argument("--model")
    s.add_argument("--adjacency")
    s.add_argument("--jaccard-tol", type=float, default=1e-3)
    s.set_defaults(func=cmd_eval)

    for name, func, help_ in (("grid", cmd_grid, "run a model x network x method grid"),
                              ("reproduce-tables", cmd_reproduce, "run the full model x network x method grid")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config")
        s.add_argument("--seed", type=int, help="run a single seed")
        s.add_argument("--seeds", type=_int_list)
        s.add_argument("--horizon", type=int)
        s.add_argument("--out", help="output directory (relative to $%s if set)"
                       % harness.OUTPUT_ROOT_ENV)
        s.add_argument("--threads", type=int, default=1)
        if name == "grid":
            s.add_argument("--models", type=_str_list, default=harness.GRID_MODELS)
            s.add_argument("--networks", type=_str_list, default=harness.GRID_NETWORKS)
            s.add_argument("--methods", type=_str_list)
            s.add_argument("--method", choices=harness.METHODS + ("both",))
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (harness.ConfigError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
