"""Alternating sparse identification of network dynamics.

The unknowns are the per-node coefficients w (length M1+M2 each) and the
nonnegative adjacency estimate A. With the multipliers lam fixed, the
augmented Lagrangian

    sum_i ||w_i||_1 + ||A_i||_1 + lam_i . r_i + (rho/2) ||r_i||^2,
    r_i = dx_i - sum_m w_im F_m(x_i) - sum_m w_i,M1+m sum_j A_ij G_m(x_i, x_j)

separates over nodes and is convex in A for fixed w and in w for fixed A.
Each outer iteration solves the A-block, then the w-block (through the
u - v split so the L1 term becomes linear), then takes a multiplier step
lam_i += alpha * r_i.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares, nnls

from .basis import BasisLibrary, a_design_from, w_design_from
from .dynamics import DivergenceError, InsufficientDataError, Trajectory, rk4
from .qpsolver import QpProblem, solve_nn_qp

log = logging.getLogger(__name__)


@dataclass
class AsindConfig:
    penalty: float = 10.0
    multiplier_step: float | None = None  # None -> equal to penalty
    outer_max_iters: int = 200
    outer_tol: float = 1e-6
    qp_tol: float = 1e-8  # relative to the subproblem's linear-term scale
    qp_max_iters: int = 50_000
    threshold_w: float = 1e-3
    threshold_a: float = 1e-3
    refit_on_support: bool = True
    refit_rounds: int = 20
    init_adjacency: float = 1.0  # off-diagonal value of the starting A
    max_reseeds: int = 3  # per node, see fit()
    reseed_tol: float = 1e-3  # relative residual that triggers a reseed
    normalize: bool = True

    def __post_init__(self):
        if self.multiplier_step is None:
            self.multiplier_step = self.penalty
        if not (self.penalty > 0 and self.multiplier_step > 0):
            raise ValueError("penalty and multiplier_step must be positive")
        if self.outer_max_iters < 1 or self.qp_max_iters < 1:
            raise ValueError("iteration limits must be positive")
        if min(self.threshold_w, self.threshold_a, self.outer_tol, self.qp_tol) < 0:
            raise ValueError("tolerances and thresholds must be nonnegative")
        if self.init_adjacency < 0:
            raise ValueError("init_adjacency must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverState:
    lam: np.ndarray  # (N, T) one multiplier per node and sample
    iteration: int = 0
    lagrangian_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    # (L before A-step, after A-step, after w-step) per outer iteration
    descent_log: list = field(default_factory=list)
    complementarity: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    converged: bool = False

    def descent_violations(self, rtol: float = 1e-9) -> list:
        """Outer iterations where a block step raised the Lagrangian."""
        bad = []
        for k, (l0, l1, l2) in enumerate(self.descent_log):
            if l1 > l0 + rtol * max(1.0, abs(l0)) or l2 > l1 + rtol * max(1.0, abs(l1)):
                bad.append(k)
        return bad

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "converged": self.converged,
                "lagrangian_history": list(map(float, self.lagrangian_history)),
                "residual_history": list(map(float, self.residual_history)),
                "warnings": list(self.warnings)}


@dataclass
class IdentifiedModel:
    w: np.ndarray  # (N, M1+M2)
    a_hat: np.ndarray  # (N, N), nonnegative, zero diagonal
    library: BasisLibrary
    method: str = "asind"

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def rhs(self, x: np.ndarray) -> np.ndarray:
        lib = self.library
        x = np.asarray(x, dtype=float)
        self_part = np.einsum("nm,mn->n", self.w[:, :lib.m1], lib.self_matrix(x))
        grid = lib.pair_grid(x)  # (M2, N, N)
        inter = np.einsum("nm,mnj,nj->n", self.w[:, lib.m1:], grid, self.a_hat)
        return self_part + inter

    def equations(self, precision: int = 3) -> list[str]:
        """Human-readable equation per node."""
        lib = self.library
        lines = []
        for i in range(self.n):
            def term(coef, name):
                return f"{coef:.{precision}g}*{name.replace('x_i', f'x_{i}')}" if name != "1" \
                    else f"{coef:.{precision}g}"
            self_terms = [term(c, b.name) for c, b in zip(self.w[i, :lib.m1], lib.self_bases) if c != 0]
            pair_terms = [term(c, b.name) for c, b in zip(self.w[i, lib.m1:], lib.pair_bases) if c != 0]
            parts = list(self_terms)
            if pair_terms and np.any(self.a_hat[i] > 0):
                inner = pair_terms[0] if len(pair_terms) == 1 else "(" + " + ".join(pair_terms) + ")"
                parts.append(f"Σ_j A_{i}j * {inner}")
            rhs_txt = " + ".join(parts) if parts else "0"
            lines.append(f"dx_{i}/dt = {rhs_txt}".replace("+ -", "- "))
        return lines


class _NodeData:
    """Basis evaluations of one node, computed once per fit."""

    def __init__(self, lib: BasisLibrary, states: np.ndarray, derivs: np.ndarray, i: int):
        self.i = i
        self.self_cols = lib.self_matrix(states[:, i]).T  # (T, M1)
        self.pair_t = np.ascontiguousarray(lib.pair_tensor(states, i))  # (M2, T, N)
        self.target = derivs[:, i]

    def residual(self, w_i, a_row):
        m1 = self.self_cols.shape[1]
        pair_cols = (self.pair_t @ a_row).T
        return self.target - self.self_cols @ w_i[:m1] - pair_cols @ w_i[m1:]


def _node_data(traj: Trajectory, lib: BasisLibrary) -> list[_NodeData]:
    if traj.derivatives is None:
        raise ValueError("trajectory has no derivatives; call estimate_derivatives first")
    return [_NodeData(lib, traj.states, traj.derivatives, i) for i in range(traj.n)]


def node_lagrangian(nd: _NodeData, w_i, a_row, lam_i, rho) -> float:
    r = nd.residual(w_i, a_row)
    return float(np.abs(w_i).sum() + np.abs(a_row).sum() + lam_i @ r + 0.5 * rho * (r @ r))


def augmented_lagrangian(traj: Trajectory, lib: BasisLibrary, w, a_hat, lam, rho) -> float:
    """The full augmented Lagrangian, summed over nodes."""
    return sum(node_lagrangian(nd, w[nd.i], a_hat[nd.i], lam[nd.i], rho)
               for nd in _node_data(traj, lib))


def _qp_tol(p: QpProblem, tol: float) -> float:
    scale = np.max(np.abs(p.design.T @ (p.multiplier + p.penalty * p.target)), initial=1.0)
    return tol * max(1.0, scale, np.max(p.linear_cost, initial=0.0))


def _solve(p, cfg, z0, state, what, i):
    sol = solve_nn_qp(p, tol=_qp_tol(p, cfg.qp_tol), max_iters=cfg.qp_max_iters, z0=z0)
    if not sol.converged:
        state.warnings.append(f"iter {state.iteration}: {what} subproblem of node {i} "
                              f"stopped at KKT {sol.kkt_residual:.3g}")
    return sol


def _a_step(nodes, w, a_hat, state, cfg):
    a_new = np.zeros_like(a_hat)
    for nd in nodes:
        i = nd.i
        design = a_design_from(nd.self_cols, nd.pair_t, w[i], nd.target, i)
        p = QpProblem(design.entries, design.target, state.lam[i], cfg.penalty)
        z0 = a_hat[i].copy()
        z0[i] = 0.0
        a_new[i] = _solve(p, cfg, z0, state, "A", i).z
        a_new[i, i] = 0.0
    return a_new


def _w_step(nodes, w, a_hat, state, cfg):
    w_new = np.zeros_like(w)
    worst = 0.0
    m = w.shape[1]
    for nd in nodes:
        i = nd.i
        design = w_design_from(nd.self_cols, nd.pair_t, a_hat[i], nd.target)
        B = design.entries
        p = QpProblem(np.hstack([B, -B]), design.target, state.lam[i], cfg.penalty)
        z0 = np.concatenate([np.maximum(w[i], 0.0), np.maximum(-w[i], 0.0)])
        z = _solve(p, cfg, z0, state, "w", i).z
        u, v = z[:m], z[m:]
        worst = max(worst, float(np.max(np.minimum(u, v))))
        w_new[i] = u - v
    state.complementarity.append(worst)
    return w_new


def a_step(traj: Trajectory, lib: BasisLibrary, w, a_hat, state: SolverState,
           cfg: AsindConfig) -> np.ndarray:
    """Update every adjacency row with w and the multipliers held fixed."""
    return _a_step(_node_data(traj, lib), np.asarray(w, float), np.asarray(a_hat, float), state, cfg)


def w_step(traj: Trajectory, lib: BasisLibrary, a_hat, state: SolverState, cfg: AsindConfig,
           w_start=None) -> np.ndarray:
    """Update every coefficient vector with A and the multipliers held fixed."""
    a_hat = np.asarray(a_hat, float)
    if np.any(a_hat < 0):
        raise ValueError("adjacency estimate must be nonnegative")
    w0 = np.zeros((traj.n, lib.size)) if w_start is None else np.asarray(w_start, float)
    return _w_step(_node_data(traj, lib), w0, a_hat, state, cfg)


def _lambda_step(nodes, w, a_hat, state, cfg):
    rmax = 0.0
    for nd in nodes:
        r = nd.residual(w[nd.i], a_hat[nd.i])
        state.lam[nd.i] += cfg.multiplier_step * r
        rmax = max(rmax, float(np.linalg.norm(r)))
    state.residual_history.append(rmax)
    return state


def lambda_step(traj: Trajectory, lib: BasisLibrary, model: IdentifiedModel, state: SolverState,
                cfg: AsindConfig) -> SolverState:
    """Multiplier ascent lam_i += alpha * r_i for every node."""
    return _lambda_step(_node_data(traj, lib), model.w, model.a_hat, state, cfg)


def _total_lagrangian(nodes, w, a_hat, lam, rho):
    return sum(node_lagrangian(nd, w[nd.i], a_hat[nd.i], lam[nd.i], rho) for nd in nodes)


def _reseed_collapsed(nodes, w, a_hat, state, cfg, reseeds):
    """Restart nodes whose interaction block has collapsed to zero.

    With w_i's pair part or A_i equal to zero, both block designs of the
    interaction term vanish and no later step can leave that point, however
    large the residual. Such a node gets A_i reset to the initial value and
    w_i re-solved, at most cfg.max_reseeds times.
    """
    m1 = nodes[0].self_cols.shape[1]
    n = a_hat.shape[0]
    for nd in nodes:
        i = nd.i
        if reseeds[i] >= cfg.max_reseeds or n < 2:
            continue
        if np.any(w[i, m1:] != 0) and np.any(a_hat[i] > 0):
            continue
        r = nd.residual(w[i], a_hat[i])
        if np.linalg.norm(r) <= cfg.reseed_tol * max(1.0, np.linalg.norm(nd.target)):
            continue
        reseeds[i] += 1
        a_hat[i] = cfg.init_adjacency
        a_hat[i, i] = 0.0
        design = w_design_from(nd.self_cols, nd.pair_t, a_hat[i], nd.target)
        B = design.entries
        p = QpProblem(np.hstack([B, -B]), design.target, state.lam[i], cfg.penalty)
        z0 = np.concatenate([np.maximum(w[i], 0.0), np.maximum(-w[i], 0.0)])
        z = _solve(p, cfg, z0, state, "w", i).z
        w[i] = z[:B.shape[1]] - z[B.shape[1]:]
        state.warnings.append(f"iter {state.iteration}: node {i} interaction block reseeded")


def fit(traj: Trajectory, lib: BasisLibrary, cfg: AsindConfig | None = None, seed: int = 0,
        init: tuple | None = None) -> tuple[IdentifiedModel, SolverState]:
    """Identify coefficients and network from a trajectory with derivatives.

    `init` optionally gives a starting (w, A); otherwise w = 0 and A has
    cfg.init_adjacency off the diagonal. The seed is accepted for interface
    stability; the loop itself is deterministic.
    """
    cfg = cfg or AsindConfig()
    n, T = traj.n, traj.steps
    if T < lib.size:
        raise InsufficientDataError(f"{T} samples cannot determine {lib.size} coefficients per node")
    nodes = _node_data(traj, lib)
    state = SolverState(lam=np.zeros((n, T)))
    if init is None:
        # w = 0 would make the first A-step return A = 0, which is a fixed
        # point of the alternation; start w from its block optimum instead
        a_hat = np.full((n, n), float(cfg.init_adjacency))
        np.fill_diagonal(a_hat, 0.0)
        w = _w_step(nodes, np.zeros((n, lib.size)), a_hat, state, cfg)
    else:
        w = np.array(init[0], dtype=float)
        a_hat = np.array(init[1], dtype=float)
    rho = cfg.penalty

    reseeds = np.zeros(n, dtype=int)
    for k in range(cfg.outer_max_iters):
        state.iteration = k
        if cfg.max_reseeds > 0 and k > 0:
            _reseed_collapsed(nodes, w, a_hat, state, cfg, reseeds)
        l0 = _total_lagrangian(nodes, w, a_hat, state.lam, rho)
        a_new = _a_step(nodes, w, a_hat, state, cfg)
        l1 = _total_lagrangian(nodes, w, a_new, state.lam, rho)
        w_new = _w_step(nodes, w, a_new, state, cfg)
        l2 = _total_lagrangian(nodes, w_new, a_new, state.lam, rho)
        if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(a_new)) and np.isfinite(l2)):
            raise DivergenceError(k, f"non-finite iterate at outer iteration {k}")
        state.descent_log.append((l0, l1, l2))
        _lambda_step(nodes, w_new, a_new, state, cfg)
        state.lagrangian_history.append(_total_lagrangian(nodes, w_new, a_new, state.lam, rho))
        change = max(np.max(np.abs(w_new - w)), np.max(np.abs(a_new - a_hat)))
        w, a_hat = w_new, a_new
        if change <= cfg.outer_tol:
            state.converged = True
            break
    state.iteration = k + 1
    model = IdentifiedModel(w, a_hat, lib)
    model = threshold_and_refit(model, traj, lib, cfg, _nodes=nodes)
    return model, state


def normalize_model(model: IdentifiedModel) -> IdentifiedModel:
    """Rescale each node so its largest adjacency weight is 1.

    The model output depends on A_i and the pair coefficients of w_i only
    through their product, so this changes nothing but the representation.
    """
    m1 = model.library.m1
    w = model.w.copy()
    a = model.a_hat.copy()
    for i in range(model.n):
        s = a[i].max(initial=0.0)
        if s > 0 and np.any(w[i, m1:] != 0):
            a[i] /= s
            w[i, m1:] *= s
        else:
            a[i] = 0.0
            w[i, m1:] = 0.0
    return IdentifiedModel(w, a, model.library, model.method)


def _polish_node(nd, w_i, a_row, w_sup, a_sup):
    """Joint bounded Gauss-Newton on the support.

    Alternating least squares crawls when the pair columns are nearly
    collinear; this finishes the job. Kept only if it lowers the residual.
    """
    m1 = nd.self_cols.shape[1]
    s_idx = np.flatnonzero(w_sup[:m1])
    p_idx = np.flatnonzero(w_sup[m1:])
    j_idx = np.flatnonzero(a_sup & (a_row > 0))
    S = nd.self_cols[:, s_idx]
    P = nd.pair_t[p_idx][:, :, j_idx]  # (mp, T, nj)
    ns, npair = s_idx.size, p_idx.size

    def split(z):
        return z[:ns], z[ns:ns + npair], z[ns + npair:]

    def resid(z):
        ws, wp, aj = split(z)
        return nd.target - S @ ws - np.einsum("m,mtj,j->t", wp, P, aj)

    def jac(z):
        _, wp, aj = split(z)
        return -np.hstack([S, (P @ aj).T, np.einsum("m,mtj->tj", wp, P)])

    z0 = np.concatenate([w_i[:m1][s_idx], w_i[m1:][p_idx], a_row[j_idx]])
    lo = np.r_[np.full(ns + npair, -np.inf), np.zeros(j_idx.size)]
    try:
        res = least_squares(resid, z0, jac=jac, bounds=(lo, np.inf), method="trf",
                            ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=200)
    except ValueError:  # scipy's trf can trip over degenerate Jacobians
        return w_i, a_row
    r0 = resid(z0)
    if not (np.all(np.isfinite(res.x)) and res.fun @ res.fun < r0 @ r0):
        return w_i, a_row
    ws, wp, aj = split(res.x)
    w_new, a_new = np.zeros_like(w_i), np.zeros_like(a_row)
    w_new[s_idx] = ws
    w_new[m1 + p_idx] = wp
    a_new[j_idx] = aj
    return w_new, a_new


def threshold_and_refit(model: IdentifiedModel, traj: Trajectory, lib: BasisLibrary,
                        cfg: AsindConfig, _nodes=None) -> IdentifiedModel:
    """Zero small entries, then refit by least squares on the surviving support.

    The refit alternates an unregularized least-squares solve for w_i on its
    support and a nonnegative least-squares solve for A_i on its support,
    then polishes both jointly.
    """
    nodes = _nodes or _node_data(traj, lib)
    m1 = lib.m1
    w = np.where(np.abs(model.w) < cfg.threshold_w, 0.0, model.w)
    a = np.where(model.a_hat < cfg.threshold_a, 0.0, model.a_hat)
    np.fill_diagonal(a, 0.0)
    if cfg.refit_on_support:
        for nd in nodes:
            i = nd.i
            w_sup = w[i] != 0
            a_sup = a[i] > 0
            prev = np.inf
            for _ in range(max(1, cfg.refit_rounds)):
                if np.any(w_sup):
                    B = w_design_from(nd.self_cols, nd.pair_t, a[i], nd.target).entries
                    w[i] = 0.0
                    w[i, w_sup] = np.linalg.lstsq(B[:, w_sup], nd.target, rcond=None)[0]
                if np.any(a_sup) and np.any(w[i, m1:] != 0):
                    d = a_design_from(nd.self_cols, nd.pair_t, w[i], nd.target, i)
                    a[i] = 0.0
                    a[i, a_sup] = nnls(d.entries[:, a_sup], d.target, maxiter=50 * a_sup.sum())[0]
                r = nd.residual(w[i], a[i])
                err = float(r @ r)
                if err >= prev * (1 - 1e-12):
                    break
                prev = err
            if np.any(a_sup) and np.any(w[i, m1:][w_sup[m1:]] != 0):
                w[i], a[i] = _polish_node(nd, w[i], a[i], w_sup, a_sup)
    out = IdentifiedModel(w, a, lib, model.method)
    return normalize_model(out) if cfg.normalize else out


def predict(model: IdentifiedModel, x0, dt: float, steps: int) -> Trajectory:
    """RK4 rollout of the identified right-hand side (steps + 1 samples)."""
    if not (np.all(np.isfinite(model.w)) and np.all(np.isfinite(model.a_hat))):
        raise ValueError("model has non-finite parameters")
    states, derivs = rk4(model.rhs, x0, dt, steps)
    return Trajectory(states, dt, derivs, origin="simulated-exact")
