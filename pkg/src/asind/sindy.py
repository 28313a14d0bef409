"""SINDy baseline: sequential thresholded least squares over monomials of all
node states, with no network structure."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .basis import DesignMatrix
from .dynamics import Trajectory, rk4


def poly_feature_names(n: int, order: int = 2, trig: bool = False) -> list[str]:
    if order not in (1, 2):
        raise ValueError(f"polynomial order must be 1 or 2, got {order}")
    names = ["1"] + [f"x_{j}" for j in range(n)]
    if order == 2:
        names += [f"x_{j}*x_{k}" if j != k else f"x_{j}^2"
                  for j, k in combinations_with_replacement(range(n), 2)]
    if trig:
        names += [f"sin(x_{j})" for j in range(n)] + [f"cos(x_{j})" for j in range(n)]
    return names


def build_poly_features(states: np.ndarray, order: int = 2, trig: bool = False) -> DesignMatrix:
    """Monomials 1, x_j, x_j*x_k (j <= k) of the stacked node states."""
    if order not in (1, 2):
        raise ValueError(f"polynomial order must be 1 or 2, got {order}")
    x = np.atleast_2d(np.asarray(states, dtype=float))
    cols = [np.ones((x.shape[0], 1)), x]
    if order == 2:
        j, k = np.triu_indices(x.shape[1])
        cols.append(x[:, j] * x[:, k])
    if trig:
        cols += [np.sin(x), np.cos(x)]
    return DesignMatrix(np.hstack(cols), None)


def _ridge(X, y, ridge):
    if ridge == 0:
        return np.linalg.lstsq(X, y, rcond=None)[0]
    G = X.T @ X
    G[np.diag_indices_from(G)] += ridge
    return np.linalg.solve(G, X.T @ y)


def stlsq(features, targets, threshold: float = 0.05, ridge: float = 1e-6,
          max_rounds: int = 20) -> np.ndarray:
    """Sequential thresholded least squares, one target column at a time.

    Returns the (features, targets) coefficient matrix.
    """
    if threshold < 0 or ridge < 0:
        raise ValueError("threshold and ridge must be nonnegative")
    X = getattr(features, "entries", features)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    coef = np.zeros((X.shape[1], Y.shape[1]))
    for c in range(Y.shape[1]):
        xi = _ridge(X, Y[:, c], ridge)
        support = np.ones(X.shape[1], dtype=bool)
        for _ in range(max_rounds):
            keep = support & (np.abs(xi) >= threshold)
            xi = np.where(keep, xi, 0.0)
            if keep.sum() == support.sum():
                break
            support = keep
            if not support.any():
                break
            xi = np.zeros(X.shape[1])
            xi[support] = _ridge(X[:, support], Y[:, c], ridge)
        coef[:, c] = xi
    return coef


@dataclass
class SindyModel:
    coef: np.ndarray  # (features, N)
    order: int = 2
    trig: bool = False
    method: str = "sindy"
    settings: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.coef.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return poly_feature_names(self.n, self.order, self.trig)

    def rhs(self, x: np.ndarray) -> np.ndarray:
        return build_poly_features(np.asarray(x)[None, :], self.order, self.trig).entries[0] @ self.coef

    def implied_adjacency(self) -> np.ndarray:
        """A_ij = 1 when node i's equation uses any feature containing x_j (j != i)."""
        n = self.n
        uses = np.zeros((self.coef.shape[0], n), dtype=bool)
        uses[1:n + 1] = np.eye(n, dtype=bool)
        row = n + 1
        if self.order == 2:
            j, k = np.triu_indices(n)
            uses[row + np.arange(j.size), j] = True
            uses[row + np.arange(j.size), k] = True
            row += j.size
        if self.trig:
            uses[row:row + n] = np.eye(n, dtype=bool)
            uses[row + n:row + 2 * n] = np.eye(n, dtype=bool)
        a = ((self.coef != 0).T.astype(int) @ uses.astype(int)) > 0
        np.fill_diagonal(a, False)
        return a.astype(float)

    def equations(self, precision: int = 3) -> list[str]:
        names = self.feature_names
        out = []
        for i in range(self.n):
            terms = [f"{c:.{precision}g}*{nm}" if nm != "1" else f"{c:.{precision}g}"
                     for c, nm in zip(self.coef[:, i], names) if c != 0]
            out.append(f"dx_{i}/dt = " + (" + ".join(terms) if terms else "0").replace("+ -", "- "))
        return out


def fit_sindy(traj: Trajectory, order: int = 2, threshold: float = 0.05, ridge: float = 1e-6,
              max_rounds: int = 20, trig: bool = False) -> SindyModel:
    if traj.derivatives is None:
        raise ValueError("trajectory has no derivatives; call estimate_derivatives first")
    feats = build_poly_features(traj.states, order, trig)
    coef = stlsq(feats, traj.derivatives, threshold, ridge, max_rounds)
    return SindyModel(coef, order, trig, settings={"threshold": threshold, "ridge": ridge,
                                                   "max_rounds": max_rounds})


def predict_sindy(model: SindyModel, x0, dt: float, steps: int) -> Trajectory:
    """RK4 rollout; raises DivergenceError when the polynomial ODE blows up."""
    states, derivs = rk4(model.rhs, x0, dt, steps)
    return Trajectory(states, dt, derivs, origin="simulated-exact")
