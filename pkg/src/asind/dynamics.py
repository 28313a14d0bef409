"""Network dynamics dx_i/dt = F(x_i) + sum_j A_ij G(x_i, x_j) for four models.

Also holds the RK4 integrator used for both simulation and rollout of
identified models, and finite-difference derivative estimation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

MODELS = ("kuramoto", "sis", "lotka-volterra", "michaelis-menten")
_ALIASES = {"lv": "lotka-volterra", "mm": "michaelis-menten"}


class DivergenceError(RuntimeError):
    """Raised when an integration produces NaN/Inf."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class InsufficientDataError(ValueError):
    pass


def canonical_model(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in MODELS:
        raise ValueError(f"unknown model {name!r}; valid names: {', '.join(MODELS)}")
    return key


@dataclass
class DynamicsSpec:
    """Parameters of one Table-1 style model.

    Per-node parameters are length-n arrays; scalars passed in are broadcast.
    """

    model: str
    n: int
    omega: np.ndarray | None = None
    delta: np.ndarray | None = None
    gamma: np.ndarray | None = None
    alpha: np.ndarray | None = None
    theta: np.ndarray | None = None
    c: float = 1.0
    h: float = 2.0

    def __post_init__(self):
        self.model = canonical_model(self.model)
        for name in ("omega", "delta", "gamma", "alpha", "theta"):
            val = getattr(self, name)
            if val is not None:
                arr = np.broadcast_to(np.asarray(val, dtype=float), (self.n,)).copy()
                setattr(self, name, arr)
        self._check()

    def _check(self):
        m = self.model
        need = {"kuramoto": ("omega",), "sis": ("delta", "gamma"),
                "lotka-volterra": ("alpha", "theta", "gamma"), "michaelis-menten": ()}[m]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"{m} model needs per-node parameter {name!r}")
        if m == "kuramoto" and not self.c > 0:
            raise ValueError("kuramoto coupling c must be positive")
        if m == "sis" and (np.any(self.delta <= 0) or np.any(self.gamma < 0)):
            raise ValueError("sis needs delta > 0 and gamma >= 0")
        if m == "lotka-volterra" and (np.any(self.alpha <= 0) or np.any(self.theta <= 0)):
            raise ValueError("lotka-volterra needs alpha > 0 and theta > 0")
        if m == "michaelis-menten" and not self.h >= 1:
            raise ValueError("michaelis-menten Hill coefficient must be >= 1")

    def to_dict(self) -> dict:
        out = {"model": self.model, "n": self.n, "c": self.c, "h": self.h}
        for name in ("omega", "delta", "gamma", "alpha", "theta"):
            val = getattr(self, name)
            out[name] = None if val is None else val.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicsSpec":
        return cls(**d)


def default_spec(model: str, n: int, rng: np.random.Generator | None = None) -> DynamicsSpec:
    """Default parameters; Kuramoto frequencies are drawn from U(-1, 1)."""
    model = canonical_model(model)
    if model == "kuramoto":
        rng = np.random.default_rng(0) if rng is None else rng
        return DynamicsSpec(model, n, omega=rng.uniform(-1.0, 1.0, n), c=1.0)
    if model == "sis":
        return DynamicsSpec(model, n, delta=0.5, gamma=0.2)
    if model == "lotka-volterra":
        return DynamicsSpec(model, n, alpha=1.0, theta=1.0, gamma=0.1)
    return DynamicsSpec(model, n, h=2.0)


def default_initial_state(model: str, n: int, rng: np.random.Generator) -> np.ndarray:
    model = canonical_model(model)
    if model == "kuramoto":
        return rng.uniform(0.0, 2 * np.pi, n)
    if model == "sis":
        return rng.uniform(0.1, 0.9, n)
    return rng.uniform(0.5, 1.5, n)


def eval_self(spec: DynamicsSpec, i: int, x_i):
    """F(x_i) for node i."""
    m = spec.model
    if m == "kuramoto":
        return spec.omega[i] + 0.0 * np.asarray(x_i)
    if m == "sis":
        return -spec.delta[i] * x_i
    if m == "lotka-volterra":
        return x_i * (spec.alpha[i] - spec.theta[i] * x_i)
    return -x_i


def eval_pair(spec: DynamicsSpec, i: int, j: int, x_i, x_j):
    """G(x_i, x_j) for the ordered pair (i, j)."""
    m = spec.model
    if m == "kuramoto":
        return spec.c / spec.n * np.sin(x_j - x_i)
    if m == "sis":
        return spec.gamma[i] * (1.0 - x_i) * x_j
    if m == "lotka-volterra":
        return -spec.gamma[i] * x_i * x_j
    xh = np.power(x_j, spec.h)
    return xh / (1.0 + xh)


def _self_vec(spec, x):
    m = spec.model
    if m == "kuramoto":
        return spec.omega.copy()
    if m == "sis":
        return -spec.delta * x
    if m == "lotka-volterra":
        return x * (spec.alpha - spec.theta * x)
    return -x


def _pair_mat(spec, x):
    xi = x[:, None]
    xj = x[None, :]
    m = spec.model
    if m == "kuramoto":
        return spec.c / spec.n * np.sin(xj - xi)
    if m == "sis":
        return spec.gamma[:, None] * (1.0 - xi) * xj
    if m == "lotka-volterra":
        return -spec.gamma[:, None] * xi * xj
    xh = np.power(xj, spec.h)
    return np.broadcast_to(xh / (1.0 + xh), (x.size, x.size))


def rhs(spec: DynamicsSpec, A, x: np.ndarray) -> np.ndarray:
    """Right-hand side of the network ODE at state x."""
    W = getattr(A, "weights", A)
    x = np.asarray(x, dtype=float)
    if x.shape != (W.shape[0],) or W.shape[0] != spec.n:
        raise ValueError(f"state of shape {x.shape} does not match {W.shape[0]} nodes")
    return _self_vec(spec, x) + np.sum(W * _pair_mat(spec, x), axis=1)


@dataclass
class Trajectory:
    """Uniformly sampled node states.

    `states` has one row per sample; `derivatives`, when present, matches it.
    """

    states: np.ndarray
    dt: float
    derivatives: np.ndarray | None = None
    origin: str = "estimated"
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory states contain NaN/Inf")
        if self.derivatives is not None:
            self.derivatives = np.asarray(self.derivatives, dtype=float)
            if self.derivatives.shape != self.states.shape:
                raise ValueError("derivatives must have the same shape as states")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def steps(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps)

    def slice(self, start: int, stop: int | None = None) -> "Trajectory":
        d = None if self.derivatives is None else self.derivatives[start:stop]
        return replace(self, states=self.states[start:stop], derivatives=d,
                       t0=self.t0 + start * self.dt, meta=dict(self.meta))


def rk4(f: Callable[[np.ndarray], np.ndarray], x0, dt: float, steps: int):
    """Classic fourth-order Runge-Kutta; returns (states, derivatives).

    Raises DivergenceError with the offending step index on NaN/Inf.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("initial state must be finite")
    states = np.empty((steps + 1, x.size))
    derivs = np.empty((steps + 1, x.size))
    states[0] = x
    with np.errstate(all="ignore"):
        k1 = f(x)
        derivs[0] = k1
        for s in range(1, steps + 1):
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(s)
            k1 = f(x)
            if not np.all(np.isfinite(k1)):
                raise DivergenceError(s)
            states[s] = x
            derivs[s] = k1
    return states, derivs


def integrate_rk4(spec: DynamicsSpec, A, x0, dt: float, steps: int) -> Trajectory:
    """Simulate `steps` RK4 steps; the result holds steps + 1 samples."""
    states, derivs = rk4(lambda x: rhs(spec, A, x), x0, dt, steps)
    return Trajectory(states, dt, derivs, origin="simulated-exact")


def estimate_derivatives(traj: Trajectory) -> Trajectory:
    """Second-order finite differences (central inside, one-sided at the ends)."""
    if traj.steps < 3:
        raise InsufficientDataError("derivative estimation needs at least 3 samples")
    x = traj.states
    dt = traj.dt
    d = np.empty_like(x)
    d[1:-1] = (x[2:] - x[:-2]) / (2 * dt)
    d[0] = (-3 * x[0] + 4 * x[1] - x[2]) / (2 * dt)
    d[-1] = (3 * x[-1] - 4 * x[-2] + x[-3]) / (2 * dt)
    return replace(traj, derivatives=d, origin="estimated", meta=dict(traj.meta))
