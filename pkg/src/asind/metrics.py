"""Prediction and structure-recovery metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DivergenceError, DynamicsSpec, integrate_rk4, rk4


def _states(x):
    return np.asarray(getattr(x, "states", x), dtype=float)


def rmse(pred, truth) -> float:
    """Root mean squared error over all samples and nodes jointly."""
    p, t = _states(pred), _states(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mape(pred, truth, eps: float = 1e-8) -> float:
    """Mean absolute percentage error, denominators guarded by eps.

    Not symmetric: the second argument is the reference.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    p, t = _states(pred), _states(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(100.0 * np.mean(np.abs(p - t) / np.maximum(np.abs(t), eps)))


def jaccard(a, a_hat, tol: float = 0.0) -> float:
    """Intersection over union of off-diagonal supports (entries > tol), in percent.

    Two empty supports count as identical (100).
    """
    w = np.asarray(getattr(a, "weights", a), dtype=float)
    w_hat = np.asarray(getattr(a_hat, "weights", a_hat), dtype=float)
    if w.shape != w_hat.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {w_hat.shape}")
    off = ~np.eye(w.shape[0], dtype=bool)
    s, s_hat = (w > tol) & off, (w_hat > tol) & off
    union = np.count_nonzero(s | s_hat)
    if union == 0:
        return 100.0
    return 100.0 * np.count_nonzero(s & s_hat) / union


@dataclass
class MetricsReport:
    rmse: float
    mape: float
    jaccard: float
    horizon: int
    diverged: bool = False
    diverged_at: int | None = None
    per_step_errors: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        """Flat values for a results CSV; infinities become the string 'inf'."""
        def f(v):
            return "inf" if math.isinf(v) else v
        return {"rmse": f(self.rmse), "mape": f(self.mape), "jaccard": self.jaccard,
                "diverged": int(self.diverged)}

    def to_dict(self) -> dict:
        d = self.row()
        d.update(horizon=self.horizon, diverged_at=self.diverged_at,
                 per_step_errors=None if self.per_step_errors is None
                 else [float(v) for v in self.per_step_errors])
        return d


def model_adjacency(model) -> np.ndarray:
    if hasattr(model, "a_hat"):
        return model.a_hat
    return model.implied_adjacency()


def evaluate_run(model, truth_spec: DynamicsSpec, truth_a, x_split, dt: float, horizon: int = 100,
                 jaccard_tol: float = 0.0, truth=None, eps: float = 1e-8) -> MetricsReport:
    """Roll out model and ground truth from x_split and score the horizon.

    The shared start sample is excluded; `truth` may pass a precomputed
    ground-truth continuation (horizon + 1 samples) to skip re-integration.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if truth is None:
        truth = integrate_rk4(truth_spec, truth_a, x_split, dt, horizon)
    t_states = _states(truth)[1:horizon + 1]
    jac = jaccard(truth_a, model_adjacency(model), jaccard_tol)
    try:
        pred, _ = rk4(model.rhs, x_split, dt, horizon)
    except DivergenceError as err:
        return MetricsReport(math.inf, math.inf, jac, horizon, True, err.step)
    p_states = pred[1:]
    per_step = np.sqrt(np.mean((p_states - t_states) ** 2, axis=1))
    with np.errstate(over="ignore", invalid="ignore"):
        r, m = rmse(p_states, t_states), mape(p_states, t_states, eps)
    if not (math.isfinite(r) and math.isfinite(m)):
        return MetricsReport(math.inf, math.inf, jac, horizon, True, None, per_step)
    return MetricsReport(r, m, jac, horizon, False, None, per_step)
