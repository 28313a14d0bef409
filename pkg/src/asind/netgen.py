"""Ground-truth network generators: Erdos-Renyi, Watts-Strogatz, and the
(alpha, beta, gamma) directed scale-free growth model."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from pathlib import Path

import networkx as nx
import numpy as np

KINDS = ("erdos-renyi", "watts-strogatz", "barabasi-albert")
_ALIASES = {"er": "erdos-renyi", "ws": "watts-strogatz", "ba": "barabasi-albert"}


class ParameterError(ValueError):
    pass


def canonical_kind(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in KINDS:
        raise ParameterError(f"unknown network kind {name!r}; valid names: {', '.join(KINDS)}")
    return key


@dataclass
class AdjacencyMatrix:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {w.shape}")
        if np.any(w < 0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        self.weights = w

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def edge_count(self) -> int:
        """Number of nonzero entries (directed count)."""
        return int(np.count_nonzero(self.weights))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.weights, self.weights.T))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(range(self.n))
        for row in self.weights:
            wr.writerow(repr(float(v)) for v in row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AdjacencyMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        n = len(rows[0])
        body = rows[1:]
        if len(body) != n:
            raise ValueError(f"expected {n} data rows, found {len(body)}")
        for k, r in enumerate(body, start=2):
            if len(r) != n:
                raise ValueError(f"line {k}: expected {n} fields, found {len(r)}")
        return cls(np.array([[float(v) for v in r] for r in body]))

    def to_edge_list(self) -> str:
        ii, jj = np.nonzero(self.weights)
        return "".join(f"{i},{j},{float(self.weights[i, j])!r}\n" for i, j in zip(ii, jj))

    @classmethod
    def from_edge_list(cls, text: str, n: int) -> "AdjacencyMatrix":
        w = np.zeros((n, n))
        for k, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {k}: expected i,j,weight")
            w[int(parts[0]), int(parts[1])] = float(parts[2])
        return cls(w)

    def save(self, path):
        path = Path(path)
        text = self.to_edge_list() if path.suffix in (".edges", ".txt") else self.to_csv()
        path.write_text(text)


def _from_graph(g, n: int) -> AdjacencyMatrix:
    w = np.zeros((n, n))
    for u, v in g.edges():
        if u != v:
            w[u, v] = 1.0
            if not g.is_directed():
                w[v, u] = 1.0
    return AdjacencyMatrix(w)


def gen_er(n: int, p: float, seed: int = 0) -> AdjacencyMatrix:
    """Undirected G(n, p)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"connection probability must lie in [0, 1], got {p}")
    if n < 1:
        raise ParameterError("n must be >= 1")
    return _from_graph(nx.gnp_random_graph(n, p, seed=seed), n)


def gen_ws(n: int, k: int, p: float, seed: int = 0) -> AdjacencyMatrix:
    """Ring lattice of even degree k, each edge rewired with probability p."""
    if k % 2 or k >= n or k < 0:
        raise ParameterError(f"degree k must be even and below n={n}, got {k}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"rewiring probability must lie in [0, 1], got {p}")
    return _from_graph(nx.watts_strogatz_graph(n, k, p, seed=seed), n)


def gen_ba_scale_free(n: int, alpha: float = 0.41, beta: float = 0.54, gamma: float = 0.05,
                      seed: int = 0, symmetrize: bool = False) -> AdjacencyMatrix:
    """Directed scale-free growth from a 3-cycle.

    alpha: add a node with an edge to an existing node chosen by in-degree;
    beta: add an edge between existing nodes (source by out-degree, target by
    in-degree); gamma: add a node with an edge from an existing node chosen by
    out-degree. Parallel edges collapse and self-loops are dropped.
    """
    if abs(alpha + beta + gamma - 1.0) > 1e-9:
        raise ParameterError(f"alpha + beta + gamma must equal 1, got {alpha + beta + gamma}")
    if min(alpha, beta, gamma) < 0:
        raise ParameterError("probabilities must be nonnegative")
    if n < 3:
        raise ParameterError("scale-free growth needs n >= 3")
    g = nx.scale_free_graph(n, alpha=alpha, beta=beta, gamma=gamma, seed=seed,
                            initial_graph=nx.cycle_graph(3, create_using=nx.MultiDiGraph))
    a = _from_graph(g, n)
    if symmetrize:
        a = AdjacencyMatrix(np.maximum(a.weights, a.weights.T))
    return a


@dataclass
class NetworkConfig:
    kind: str = "erdos-renyi"
    n: int = 16
    er_p: float = 0.1
    ws_k: int = 4
    ws_p: float = 0.1
    ba_alpha: float = 0.41
    ba_beta: float = 0.54
    ba_gamma: float = 0.05
    ba_symmetrize: bool = False
    seed: int = 0

    def __post_init__(self):
        self.kind = canonical_kind(self.kind)
        if not 0 <= self.er_p <= 1 or not 0 <= self.ws_p <= 1:
            raise ParameterError("probabilities must lie in [0, 1]")
        if self.ws_k % 2 or self.ws_k >= self.n:
            raise ParameterError("ws_k must be even and below n")
        if abs(self.ba_alpha + self.ba_beta + self.ba_gamma - 1.0) > 1e-9:
            raise ParameterError("ba_alpha + ba_beta + ba_gamma must equal 1")

    def to_dict(self) -> dict:
        return asdict(self)


def generate(cfg: NetworkConfig, seed: int | None = None) -> AdjacencyMatrix:
    seed = cfg.seed if seed is None else seed
    if cfg.kind == "erdos-renyi":
        return gen_er(cfg.n, cfg.er_p, seed)
    if cfg.kind == "watts-strogatz":
        return gen_ws(cfg.n, cfg.ws_k, cfg.ws_p, seed)
    return gen_ba_scale_free(cfg.n, cfg.ba_alpha, cfg.ba_beta, cfg.ba_gamma, seed,
                             symmetrize=cfg.ba_symmetrize)
