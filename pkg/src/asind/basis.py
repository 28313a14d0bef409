"""Candidate-function dictionaries and the regression designs built from them.

Self bases are functions of the node's own state x_i; pair bases are
functions of (x_i, x_j) that get summed over neighbours with weights A_ij.
Bases are addressed by string keys so a library can live in a config file:

    self keys: const, x, x2, poly:K
    pair keys: xj, xixj, xj2, poly:K, sin_diff, sis_cross, hillH (e.g. hill2)
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .dynamics import Trajectory


@dataclass(frozen=True)
class Basis:
    key: str
    name: str  # printable, written with x_i / x_j
    fn: Callable


@dataclass
class BasisLibrary:
    self_bases: list
    pair_bases: list

    def __post_init__(self):
        if not self.self_bases or not self.pair_bases:
            raise ValueError("a library needs at least one self basis and one pair basis")
        names = self.names
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate basis names in library: {names}")

    @property
    def m1(self) -> int:
        return len(self.self_bases)

    @property
    def m2(self) -> int:
        return len(self.pair_bases)

    @property
    def size(self) -> int:
        return self.m1 + self.m2

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.self_bases] + [b.name for b in self.pair_bases]

    @property
    def keys(self) -> dict:
        return {"self": [b.key for b in self.self_bases], "pair": [b.key for b in self.pair_bases]}

    def self_matrix(self, states: np.ndarray) -> np.ndarray:
        """(M1, T, N) array of F_m evaluated at every node and sample."""
        return np.stack([np.broadcast_to(b.fn(states), states.shape) for b in self.self_bases])

    def pair_tensor(self, states: np.ndarray, i: int) -> np.ndarray:
        """(M2, T, N) array of G_m(x_i(t), x_j(t)) for fixed i."""
        xi = states[:, i:i + 1]
        return np.stack([np.broadcast_to(b.fn(xi, states), states.shape) for b in self.pair_bases])

    def pair_grid(self, x: np.ndarray) -> np.ndarray:
        """(M2, N, N) array of G_m(x_i, x_j) at a single state vector."""
        xi = x[:, None]
        xj = x[None, :]
        return np.stack([np.broadcast_to(b.fn(xi, xj), (x.size, x.size)) for b in self.pair_bases])

    def reordered(self, self_order, pair_order) -> "BasisLibrary":
        return BasisLibrary([self.self_bases[k] for k in self_order],
                            [self.pair_bases[k] for k in pair_order])


def _hill(h: float) -> Callable:
    def fn(xi, xj):
        p = np.power(xj, h)
        return p / (1.0 + p)
    return fn


def _fmt_power(var: str, k: int) -> str:
    return var if k == 1 else f"{var}^{k}"


def _self_monomial(k: int) -> Basis:
    if k == 0:
        return Basis("const", "1", lambda x: np.ones_like(x))
    key = "x" if k == 1 else f"x{k}"
    return Basis(key, _fmt_power("x_i", k), lambda x, k=k: x ** k)


def _pair_monomial(a: int, b: int) -> Basis:
    """x_i^b * x_j^a with a >= 1."""
    parts = ([_fmt_power("x_i", b)] if b else []) + [_fmt_power("x_j", a)]
    key = "xi" * bool(b) + (str(b) if b > 1 else "") + "xj" + (str(a) if a > 1 else "")
    return Basis(key, "*".join(parts), lambda xi, xj, a=a, b=b: xi ** b * xj ** a)


def _expand_self(key: str) -> list[Basis]:
    if key == "const":
        return [_self_monomial(0)]
    if key == "x":
        return [_self_monomial(1)]
    m = re.fullmatch(r"x(\d+)", key)
    if m:
        return [_self_monomial(int(m.group(1)))]
    m = re.fullmatch(r"poly:(\d+)", key)
    if m:
        return [_self_monomial(k) for k in range(int(m.group(1)) + 1)]
    raise ValueError(f"unknown self basis key {key!r}")


def _expand_pair(key: str) -> list[Basis]:
    m = re.fullmatch(r"poly:(\d+)", key)
    if m:
        # x_j, x_i*x_j, x_j^2, x_i^2*x_j, ...: by total degree, higher x_i power first
        return [_pair_monomial(total - b, b)
                for total in range(1, int(m.group(1)) + 1)
                for b in range(total - 1, -1, -1)]
    m = re.fullmatch(r"(xi(\d*))?xj(\d*)", key)
    if m:
        b = 0 if m.group(1) is None else int(m.group(2) or 1)
        a = int(m.group(3) or 1)
        return [_pair_monomial(a, b)]
    if key == "sin_diff":
        return [Basis(key, "sin(x_j-x_i)", lambda xi, xj: np.sin(xj - xi))]
    if key == "sis_cross":
        return [Basis(key, "(1-x_i)*x_j", lambda xi, xj: (1.0 - xi) * xj)]
    m = re.fullmatch(r"hill:?(\d+(?:\.\d+)?)", key)
    if m:
        h = float(m.group(1))
        hs = m.group(1)
        return [Basis(f"hill{hs}", f"x_j^{hs}/(1+x_j^{hs})", _hill(h))]
    raise ValueError(f"unknown pair basis key {key!r}")


def make_library(self_keys, pair_keys) -> BasisLibrary:
    return BasisLibrary([b for k in self_keys for b in _expand_self(k)],
                        [b for k in pair_keys for b in _expand_pair(k)])


def default_library(h: float = 2.0) -> BasisLibrary:
    """[1, x_i, x_i^2] and [x_j, x_i*x_j, x_j^2, sin(x_j-x_i), Hill_h, (1-x_i)*x_j]."""
    hs = str(int(h)) if float(h).is_integer() else str(h)
    return make_library(["poly:2"], ["poly:2", "sin_diff", f"hill{hs}", "sis_cross"])


def load_library(source) -> BasisLibrary:
    """Build a library from a dict or a JSON file with "self" and "pair" key lists."""
    if isinstance(source, (str, Path)):
        source = json.loads(Path(source).read_text())
    unknown = set(source) - {"self", "pair"}
    if unknown:
        raise ValueError(f"unknown library config keys: {sorted(unknown)}")
    return make_library(source["self"], source["pair"])


@dataclass
class DesignMatrix:
    entries: np.ndarray
    target: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("design matrix contains NaN/Inf")
        if self.target is not None:
            if self.target.shape != (self.entries.shape[0],):
                raise ValueError("target needs one entry per design row")
            if not np.all(np.isfinite(self.target)):
                raise ValueError("design target contains NaN/Inf")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


def _require_derivatives(traj: Trajectory):
    if traj.derivatives is None:
        raise ValueError("trajectory has no derivatives; call estimate_derivatives first")


def w_design_from(self_cols: np.ndarray, pair_t: np.ndarray, a_row: np.ndarray,
                  target: np.ndarray) -> DesignMatrix:
    """Assemble the w-step design from precomputed basis evaluations.

    self_cols is (T, M1); pair_t is (M2, T, N).
    """
    pair_cols = (pair_t @ a_row).T
    return DesignMatrix(np.hstack([self_cols, pair_cols]), target)


def a_design_from(self_cols: np.ndarray, pair_t: np.ndarray, w_i: np.ndarray,
                  target: np.ndarray, i: int) -> DesignMatrix:
    m1 = self_cols.shape[1]
    cols = np.tensordot(w_i[m1:], pair_t, axes=1)
    cols[:, i] = 0.0
    return DesignMatrix(cols, target - self_cols @ w_i[:m1])


def assemble_w_design(lib: BasisLibrary, traj: Trajectory, i: int, a_row) -> DesignMatrix:
    """Linear system in w_i for a fixed adjacency row.

    Column m < M1 holds F_m(x_i); column M1+m holds sum_j A_ij G_m(x_i, x_j).
    """
    _require_derivatives(traj)
    a_row = np.asarray(a_row, dtype=float)
    if np.any(a_row < 0):
        raise ValueError("adjacency row must be nonnegative")
    x = traj.states
    self_cols = lib.self_matrix(x[:, i]).T
    return w_design_from(self_cols, lib.pair_tensor(x, i), a_row, traj.derivatives[:, i])


def assemble_a_design(lib: BasisLibrary, traj: Trajectory, i: int, w_i) -> DesignMatrix:
    """Linear system in A_i for fixed coefficients.

    Column j holds sum_m w_i[M1+m] G_m(x_i, x_j); column i is pinned to zero.
    The target is dx_i/dt minus the self-dynamics part.
    """
    _require_derivatives(traj)
    w_i = np.asarray(w_i, dtype=float)
    x = traj.states
    self_cols = lib.self_matrix(x[:, i]).T
    return a_design_from(self_cols, lib.pair_tensor(x, i), w_i, traj.derivatives[:, i], i)
