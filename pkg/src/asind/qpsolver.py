"""Nonnegative quadratic programs shared by the A-step and the split w-step.

Every subproblem has the form

    minimize   c.z + lam.(y - B z) + (rho/2) ||y - B z||^2
    subject to z >= 0

which is solved by accelerated projected gradient (fixed step 1/L with
gradient-based restart) finished by a primal active-set pass that makes the
solution exact on its support.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numba
import numpy as np


@dataclass
class QpProblem:
    """Data of one nonnegative subproblem.

    Parameters
    ----------
    design : ndarray
        T x n matrix B.
    target : ndarray
        length-T vector y.
    multiplier : ndarray
        length-T vector lambda.
    penalty : float
        rho > 0.
    linear_cost : ndarray, optional
        length-n nonnegative vector c (all ones when omitted).
    """

    design: np.ndarray
    target: np.ndarray
    multiplier: np.ndarray
    penalty: float
    linear_cost: np.ndarray | None = None

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.target = np.asarray(self.target, dtype=float).ravel()
        self.multiplier = np.asarray(self.multiplier, dtype=float).ravel()
        t, n = self.design.shape
        if self.linear_cost is None:
            self.linear_cost = np.ones(n)
        self.linear_cost = np.asarray(self.linear_cost, dtype=float).ravel()
        if not self.penalty > 0:
            raise ValueError(f"penalty must be positive, got {self.penalty}")
        if self.target.shape != (t,) or self.multiplier.shape != (t,):
            raise ValueError("target and multiplier must have one entry per design row")
        if self.linear_cost.shape != (n,):
            raise ValueError("linear_cost must have one entry per design column")
        if np.any(self.linear_cost < 0):
            raise ValueError("linear_cost must be nonnegative")

    @property
    def n_vars(self) -> int:
        return self.design.shape[1]

    def quadratic_form(self) -> tuple[np.ndarray, np.ndarray, float]:
        """Return (H, q, const) with objective = z'Hz/2 + q'z + const."""
        B = self.design
        H = self.penalty * (B.T @ B)
        q = self.linear_cost - B.T @ (self.multiplier + self.penalty * self.target)
        const = self.multiplier @ self.target + 0.5 * self.penalty * (self.target @ self.target)
        return H, q, const

    def objective(self, z: np.ndarray) -> float:
        r = self.target - self.design @ z
        return float(self.linear_cost @ z + self.multiplier @ r + 0.5 * self.penalty * (r @ r))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        r = self.design @ z - self.target
        return self.linear_cost - self.design.T @ self.multiplier + self.penalty * (self.design.T @ r)


@dataclass
class QpSolution:
    z: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)


def kkt_residual(p: QpProblem, z: np.ndarray) -> float:
    """Infinity norm of min(z, grad f(z)); zero exactly at the optimum."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return 0.0
    return float(np.max(np.abs(np.minimum(z, p.gradient(z)))))


def _kkt(H, q, z):
    if z.size == 0:
        return 0.0
    return float(np.max(np.abs(np.minimum(z, H @ z + q))))


def _quad(H, q, z):
    return 0.5 * z @ (H @ z) + q @ z


def lipschitz_constant(H: np.ndarray, iters: int = 100, seed: int = 0) -> float:
    """Largest eigenvalue of the PSD matrix H by power iteration.

    The estimate approaches from below, so a small safety margin is added.
    """
    n = H.shape[0]
    v = np.random.default_rng(seed).uniform(0.5, 1.5, n)
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(iters):
        hv = H @ v
        nrm = np.linalg.norm(hv)
        if nrm == 0.0:
            return 0.0
        v = hv / nrm
        mu_new = v @ (H @ v)
        if abs(mu_new - mu) <= 1e-12 * mu_new:
            mu = mu_new
            break
        mu = mu_new
    # Gershgorin is a hard upper bound; never exceed it
    gersh = float(np.max(np.sum(np.abs(H), axis=1)))
    return min(1.02 * mu + 1e-300, gersh)


@numba.njit(cache=True)
def _apg_chunk(H, q, z, z_prev, t, step, n_iters):
    """Run n_iters accelerated projected-gradient steps with restart.

    A step that raises the objective is replaced by a plain projected
    gradient step from z, so the objective never increases.
    """
    n = z.shape[0]
    f_z = 0.0
    hz = H @ z
    for k in range(n):
        f_z += z[k] * (0.5 * hz[k] + q[k])
    for _ in range(n_iters):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        yv = z + beta * (z - z_prev)
        for k in range(n):
            if yv[k] < 0.0:
                yv[k] = 0.0
        g = H @ yv + q
        z_new = yv - step * g
        for k in range(n):
            if z_new[k] < 0.0:
                z_new[k] = 0.0
        hz = H @ z_new
        f_new = 0.0
        for k in range(n):
            f_new += z_new[k] * (0.5 * hz[k] + q[k])
        # gradient restart, plus a monotone fallback
        restart = 0.0
        for k in range(n):
            restart += (yv[k] - z_new[k]) * (z_new[k] - z[k])
        if f_new > f_z or restart > 0.0:
            g = H @ z + q
            z_new = z - step * g
            for k in range(n):
                if z_new[k] < 0.0:
                    z_new[k] = 0.0
            hz = H @ z_new
            f_new = 0.0
            for k in range(n):
                f_new += z_new[k] * (0.5 * hz[k] + q[k])
            t_next = 1.0
            if f_new > f_z:
                # step too long for round-off; stay put
                z_new = z.copy()
                f_new = f_z
        z_prev = z
        z = z_new
        f_z = f_new
        t = t_next
    return z, z_prev, t


def _subspace_solve(Hp, qp):
    """Least-squares solution of Hp s = -qp with two refinement sweeps."""
    s = np.linalg.lstsq(Hp, -qp, rcond=None)[0]
    for _ in range(2):
        s = s - np.linalg.lstsq(Hp, Hp @ s + qp, rcond=None)[0]
    return s, Hp @ s + qp


def _active_set(H, q, z, tol, max_steps):
    """Primal active-set finish in the style of Lawson and Hanson.

    Starting from a feasible z, alternately move to the minimizer on the
    free set (dropping variables that hit zero on the way) and free the
    bound variable with the most negative gradient. Singular free-set
    blocks are handled by following the descent direction in their null
    space, along which the objective is linear. Every move is a descent
    step, so the objective never increases. Returns (z, kkt, converged).
    """
    n = q.size
    z = z.copy()
    free = z > 0.0
    scale = 1e-12 * (1.0 + np.max(np.abs(q)))
    last_added = -1
    for _ in range(max_steps):
        for _ in range(2 * n + 2):
            idx = np.flatnonzero(free)
            if idx.size == 0:
                break
            Hp, qp, zp = H[np.ix_(idx, idx)], q[idx], z[idx]
            s, r = _subspace_solve(Hp, qp)
            blocking = None
            if np.max(np.abs(r)) <= scale * (1.0 + np.max(np.abs(Hp)) * np.max(np.abs(s))):
                if np.all(s > 0.0):
                    z[idx] = s
                    break
                neg = np.flatnonzero(s <= 0.0)
                ratios = zp[neg] / (zp[neg] - s[neg])
                k = int(np.argmin(ratios))
                z[idx] = zp + ratios[k] * (s - zp)
                blocking = idx[neg[k]]
            else:
                # inconsistent block: -r is a (near) null direction of Hp along
                # which the objective decreases
                d = -r
                slope = (Hp @ zp + qp) @ d
                neg = np.flatnonzero(d < 0.0)
                if neg.size == 0 or slope >= 0.0:
                    return z, _kkt(H, q, z), False
                ratios = zp[neg] / -d[neg]
                k = int(np.argmin(ratios))
                t = ratios[k]
                curv = d @ (Hp @ d)
                if curv > 0.0 and -slope / curv < t:
                    t = -slope / curv
                else:
                    blocking = idx[neg[k]]
                z[idx] = zp + t * d
            z[idx] = np.maximum(z[idx], 0.0)
            if blocking is not None:
                z[blocking] = 0.0
            dropped = idx[z[idx] <= 0.0]
            z[dropped] = 0.0
            free[dropped] = False
        g = H @ z + q
        kkt = _kkt(H, q, z)
        if kkt <= tol:
            return z, kkt, True
        cand = np.where(free, np.inf, g)
        j = int(np.argmin(cand))
        if cand[j] >= -tol or (j == last_added and z[j] == 0.0):
            # free block not solved to tol, or the same variable bounced back
            return z, kkt, False
        free[j] = True
        last_added = j
    return z, _kkt(H, q, z), False


def solve_quadratic(H, q, z0=None, tol=1e-8, max_iters=50_000, chunk=200, lipschitz=None,
                    trace=None):
    """Minimize z'Hz/2 + q'z over z >= 0 for PSD H.

    An active-set finish is tried from the warm start first; if it stalls,
    accelerated projected gradient runs in chunks and the finish is retried
    from each chunk's iterate. Returns (z, kkt, iterations, converged).
    When `trace` is a list, the objective after every accepted iterate is
    appended to it (gradient steps then run one at a time).
    """
    n = q.shape[0]
    z = np.zeros(n) if z0 is None else np.maximum(np.asarray(z0, dtype=float), 0.0).copy()
    if n == 0:
        return z, 0.0, 0, True
    L = lipschitz_constant(H) if lipschitz is None else lipschitz
    if L <= 0.0:
        # H == 0: linear objective, optimum at 0 when q >= 0, unbounded otherwise
        z = np.zeros(n)
        kkt = _kkt(H, q, z)
        return z, kkt, 0, kkt <= tol
    step = 1.0 / L
    max_steps = 3 * n + 10
    if trace is not None:
        chunk = 1
        trace.append(_quad(H, q, z))

    z, kkt, ok = _active_set(H, q, z, tol, max_steps)
    if trace is not None:
        trace.append(_quad(H, q, z))
    if ok:
        return z, kkt, 0, True

    z_prev = z.copy()
    t = 1.0
    it = 0
    while it < max_iters:
        n_run = min(chunk, max_iters - it)
        z, z_prev, t = _apg_chunk(H, q, z, z_prev, t, step, n_run)
        it += n_run
        kkt = _kkt(H, q, z)
        cand, kkt_c, ok = _active_set(H, q, z, tol, max_steps)
        if kkt_c < kkt and _quad(H, q, cand) <= _quad(H, q, z) + 1e-13 * (1.0 + abs(_quad(H, q, z))):
            z, kkt = cand, kkt_c
            z_prev = z.copy()
            t = 1.0
        if trace is not None:
            trace.append(_quad(H, q, z))
        if kkt <= tol:
            return z, kkt, it, True
    return z, kkt, it, False


def solve_nn_qp(p: QpProblem, tol: float = 1e-8, max_iters: int = 50_000,
                z0: np.ndarray | None = None, trace: bool = False) -> QpSolution:
    """Solve a nonnegative subproblem to KKT residual `tol`.

    Columns of the design that are identically zero have their variable
    fixed at 0 (with c >= 0 any positive value there is suboptimal).
    When `z0` is given the solver warm-starts from it and the returned
    objective never exceeds the objective at `z0`. With `trace` set, the
    solution carries the objective value of every iterate (see write_trace).
    """
    n = p.n_vars
    if z0 is not None:
        z0 = np.maximum(np.asarray(z0, dtype=float).ravel(), 0.0)
    active = np.any(p.design != 0.0, axis=0)
    z = np.zeros(n)
    if not np.any(active):
        return QpSolution(z, kkt_residual(p, z), 0, True)
    sub = QpProblem(p.design[:, active], p.target, p.multiplier, p.penalty,
                    p.linear_cost[active])
    H, q, _ = sub.quadratic_form()
    start = None if z0 is None else z0[active]
    reduced = [] if trace else None
    zs, _, iters, _ = solve_quadratic(H, q, start, tol=tol, max_iters=max_iters, trace=reduced)
    z[active] = zs
    if z0 is not None and p.objective(z) > p.objective(z0):
        # round-off in the reduced form; keep the warm start
        z = z0.copy()
        z[~active] = 0.0
    kkt = kkt_residual(p, z)
    # the reduced form drops a constant; shift back to the full objective
    shift = p.objective(np.zeros(n))
    history = [float(v + shift) for v in reduced] if trace else []
    return QpSolution(z, kkt, iters, kkt <= tol, history)


def write_trace(sol: QpSolution, path):
    """Dump a traced solve as CSV rows `iterate,objective`."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["iterate", "objective"])
        for k, v in enumerate(sol.objective_trace):
            wr.writerow([k, f"{v:.17g}"])
