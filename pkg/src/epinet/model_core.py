"""Graphs, random-graph generators, spectral computations, and model parameters.

Implements:
  - Graph: immutable undirected graph with optional edge weights in [0, 1],
    adjacency matrices (dense and sparse), neighbor lists, connectivity.
  - parse_edge_list / format_edge_list: line-oriented edge-list I/O.
  - generate: seeded generators (er, geometric, complete, star, path).
  - spectral_radius: dominant eigenvalue/eigenvector of the (weighted)
    adjacency matrix by power iteration.
  - ModelSpec: validated parameter set for the six epidemic variants
    (sis-nia, sis-ia, sis-general, sirs, siv-id, siv-vd).
  - threshold_ratio: the variant's local-stability ratio (< 1 predicts
    extinction of the mean-field dynamics).
  - degree_stats, contact_from_rates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

VARIANTS = ("sis-nia", "sis-ia", "sis-general", "sirs", "siv-id", "siv-vd")

# Iteration cap for power iteration.
POWER_ITERATION_CAP = 10 ** 6


class GraphError(ValueError):
    """Invalid graph construction or edge-list input."""


class ModelError(ValueError):
    """Invalid model parameters."""


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph on nodes 0..n-1 with optional edge weights.

    Edges are stored as sorted (i, j) pairs with i < j; ``weights`` is a
    parallel tuple (default all 1.0). No self-loops.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n < 1:
            raise GraphError(f"node count must be >= 1, got {self.n}")
        norm = []
        for (i, j) in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop ({i},{j}) not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i},{j}) out of range for n={self.n}")
            norm.append((min(i, j), max(i, j)))
        if self.weights == ():
            object.__setattr__(self, "weights", (1.0,) * len(norm))
        if len(self.weights) != len(norm):
            raise GraphError("weights length must match edge count")
        object.__setattr__(
            self, "weights", tuple(float(w) for w in self.weights)
        )
        for w in self.weights:
            if not (0.0 <= w <= 1.0):
                raise GraphError(f"edge weight {w} outside [0,1]")
        seen: dict[tuple[int, int], float] = {}
        order = []
        for e, w in zip(norm, self.weights):
            if e in seen:
                if seen[e] != w:
                    raise GraphError(f"conflicting weights for duplicate edge {e}")
                continue
            seen[e] = w
            order.append(e)
        object.__setattr__(self, "edges", tuple(order))
        object.__setattr__(self, "weights", tuple(seen[e] for e in order))

    @property
    def m(self) -> int:
        """Edge count."""
        return len(self.edges)

    @cached_property
    def neighbor_arrays(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per node i: (array of neighbor indices, array of edge weights)."""
        idx: list[list[int]] = [[] for _ in range(self.n)]
        wts: list[list[float]] = [[] for _ in range(self.n)]
        for (i, j), w in zip(self.edges, self.weights):
            idx[i].append(j)
            wts[i].append(w)
            idx[j].append(i)
            wts[j].append(w)
        return tuple(
            (np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.float64))
            for a, b in zip(idx, wts)
        )

    def neighbors(self, i: int) -> np.ndarray:
        return self.neighbor_arrays[i][0]

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for (i, j) in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def adjacency(self) -> np.ndarray:
        """Dense weighted adjacency matrix (symmetric, zero diagonal)."""
        A = np.zeros((self.n, self.n))
        for (i, j), w in zip(self.edges, self.weights):
            A[i, j] = w
            A[j, i] = w
        return A

    @cached_property
    def adjacency_sparse(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix((self.n, self.n))
        rows, cols, vals = [], [], []
        for (i, j), w in zip(self.edges, self.weights):
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def is_weighted(self) -> bool:
        return any(w != 1.0 for w in self.weights)

    def components(self) -> list[list[int]]:
        """Connected components as sorted node lists, largest first."""
        seen = np.zeros(self.n, dtype=bool)
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            stack = [s]
            seen[s] = True
            comp = [s]
            while stack:
                v = stack.pop()
                for u in self.neighbors(v):
                    u = int(u)
                    if not seen[u]:
                        seen[u] = True
                        comp.append(u)
                        stack.append(u)
            comps.append(sorted(comp))
        comps.sort(key=len, reverse=True)
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def subgraph(self, nodes: list[int]) -> "Graph":
        """Induced subgraph; nodes are relabeled 0..len(nodes)-1 in list order."""
        pos = {v: k for k, v in enumerate(nodes)}
        es, ws = [], []
        for (i, j), w in zip(self.edges, self.weights):
            if i in pos and j in pos:
                es.append((pos[i], pos[j]))
                ws.append(w)
        return Graph(len(nodes), tuple(es), tuple(ws))


# ---------------------------------------------------------------------------
# Edge-list I/O
# ---------------------------------------------------------------------------

def parse_edge_list(text: str) -> Graph:
    """Parse a line-oriented edge list into a Graph.

    Each non-comment line is "u v" or "u v w" with integer node indices and
    an optional weight in [0, 1]. '#' starts a comment (full-line or
    trailing). A line "n=<k>" overrides the node count (otherwise
    n = 1 + max index). Duplicate edges are merged; duplicates with
    conflicting weights are an error.
    """
    edges: list[tuple[int, int]] = []
    weights: list[float] = []
    n_header: int | None = None
    max_idx = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("n=") or line.startswith("n ="):
            try:
                n_header = int(line.split("=", 1)[1].strip())
            except ValueError:
                raise GraphError(f"line {lineno}: malformed header {line!r}")
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"line {lineno}: expected 'u v' or 'u v w', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer node index in {raw!r}")
        if u == v:
            raise GraphError(f"line {lineno}: self-loop {u} {v}")
        if u < 0 or v < 0:
            raise GraphError(f"line {lineno}: negative node index in {raw!r}")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphError(f"line {lineno}: non-numeric weight in {raw!r}")
            if not (0.0 <= w <= 1.0):
                raise GraphError(f"line {lineno}: weight {w} outside [0,1]")
        edges.append((u, v))
        weights.append(w)
        max_idx = max(max_idx, u, v)
    n = n_header if n_header is not None else max_idx + 1
    if n < 1:
        raise GraphError("edge list defines no nodes")
    if max_idx >= n:
        raise GraphError(f"node index {max_idx} exceeds declared n={n}")
    return Graph(n, tuple(edges), tuple(weights))


def format_edge_list(graph: Graph) -> str:
    """Inverse of parse_edge_list (always emits the n= header)."""
    lines = [f"n={graph.n}"]
    for (i, j), w in zip(graph.edges, graph.weights):
        lines.append(f"{i} {j}" if w == 1.0 else f"{i} {j} {w!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def generate(kind: str, seed: int = 0, **params) -> Graph:
    """Generate a graph deterministically from (kind, params, seed).

    Kinds and parameters:
      - er: n, p — each unordered pair included independently with prob p.
      - geometric: n, r — uniform points in the unit square, edge iff
        Euclidean distance < r.
      - complete / star / path: n. Star hub is node 0.
    """
    if "n" not in params:
        raise GraphError(f"generator {kind!r} requires n")
    n = int(params["n"])
    if n < 1:
        raise GraphError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "er":
        if "p" not in params:
            raise GraphError("er generator requires p")
        p = float(params["p"])
        if not (0.0 <= p <= 1.0):
            raise GraphError(f"probability p={p} outside [0,1]")
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(len(iu)) < p
        edges = tuple((int(a), int(b)) for a, b in zip(iu[mask], ju[mask]))
        return Graph(n, edges)
    if kind == "geometric":
        if "r" not in params:
            raise GraphError("geometric generator requires r")
        r = float(params["r"])
        if r <= 0:
            raise GraphError(f"radius r={r} must be > 0")
        pts = rng.random((n, 2))
        iu, ju = np.triu_indices(n, k=1)
        d2 = ((pts[iu] - pts[ju]) ** 2).sum(axis=1)
        mask = d2 < r * r
        edges = tuple((int(a), int(b)) for a, b in zip(iu[mask], ju[mask]))
        return Graph(n, edges)
    if kind == "complete":
        return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))
    if kind == "star":
        return Graph(n, tuple((0, j) for j in range(1, n)))
    if kind == "path":
        return Graph(n, tuple((i, i + 1) for i in range(n - 1)))
    raise GraphError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# Spectral computations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralReport:
    """Dominant eigenpair of a nonnegative matrix.

    residual is the infinity norm of A v - lambda v with v normalized to
    unit maximum entry.
    """

    lambda_max: float
    iterations: int
    residual: float
    eigvec: np.ndarray


def _power_iteration(matvec, n: int, tol: float, cap: int = POWER_ITERATION_CAP):
    """Power iteration on a nonnegative matrix given by its matvec.

    Iterates on (A + I) so that bipartite structures (where the raw adjacency
    has a -lambda_max eigenvalue matching +lambda_max in magnitude) still
    converge; the +1 shift is removed from the reported eigenvalue.
    Starts from the all-ones vector. Converges when successive Rayleigh
    quotients differ by < tol and the eigenvector residual is < tol.
    """
    v = np.ones(n)
    v /= np.linalg.norm(v)
    lam_shift = 0.0
    it = 0
    for it in range(1, cap + 1):
        w = matvec(v) + v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # Zero matrix: (A+I)v = v, handled below; cannot happen here.
            break
        w /= nw
        lam_new = float(w @ (matvec(w) + w))
        res_vec = (matvec(w) + w) - lam_new * w
        res = float(np.abs(res_vec).max())
        converged = abs(lam_new - lam_shift) < tol and res < tol
        lam_shift = lam_new
        v = w
        if converged:
            break
    lam = lam_shift - 1.0
    # Normalize to unit max entry, fix sign (Perron vector is nonnegative).
    mx = np.abs(v).max()
    if mx > 0:
        v = v / v[np.abs(v).argmax()]
    v = np.clip(v, 0.0, None)
    scale = v.max() if v.max() > 0 else 1.0
    v = v / scale
    return lam, it, v


def spectral_radius(graph: Graph, tol: float = 1e-10) -> SpectralReport:
    """Dominant adjacency eigenvalue and Perron vector by power iteration.

    Weights are applied. On a disconnected graph a warning is issued and the
    computation runs on the largest connected component; the returned
    eigenvector has zeros outside that component. Non-convergence after the
    iteration cap issues a warning and reports the achieved residual.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    comps = graph.components()
    target = graph
    embed: list[int] | None = None
    if len(comps) > 1:
        warnings.warn(
            f"graph is disconnected ({len(comps)} components); "
            "using largest component",
            stacklevel=2,
        )
        embed = comps[0]
        target = graph.subgraph(embed)
    if target.m == 0:
        eig = np.zeros(graph.n)
        if graph.n:
            eig[(embed or [0])[0]] = 1.0
        return SpectralReport(0.0, 0, 0.0, eig)
    if target.n > 400:
        A = target.adjacency_sparse
        matvec = lambda x: A @ x
    else:
        A = target.adjacency()
        matvec = lambda x: A @ x
    lam, it, v = _power_iteration(matvec, target.n, tol)
    res = float(np.abs(matvec(v) - lam * v).max())
    if res > tol * max(1.0, abs(lam)) and it >= POWER_ITERATION_CAP:
        warnings.warn(
            f"power iteration did not converge (residual {res:.3e})",
            stacklevel=2,
        )
    if embed is not None:
        full = np.zeros(graph.n)
        full[np.asarray(embed)] = v
        v = full
    return SpectralReport(lam, it, res, v)


def _matrix_spectral_radius(M: np.ndarray, tol: float = 1e-12) -> float:
    """Perron root of a nonnegative square matrix (power iteration)."""
    M = np.asarray(M, dtype=float)
    lam, _, _ = _power_iteration(lambda x: M @ x, M.shape[0], tol)
    return lam


# ---------------------------------------------------------------------------
# ModelSpec
# ---------------------------------------------------------------------------

_REQUIRED: dict[str, tuple[str, ...]] = {
    "sis-nia": ("beta", "delta"),
    "sis-ia": ("beta", "delta"),
    "sis-general": ("contact",),
    "sirs": ("beta", "delta", "gamma"),
    "siv-id": ("beta", "delta", "gamma", "theta"),
    "siv-vd": ("beta", "delta", "gamma", "theta"),
}


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Epidemic model parameters for one of the six variants.

    Required fields per variant (all others must be absent):
      - sis-nia / sis-ia: beta, delta
      - sis-general: contact (square matrix, entries in [0,1];
        diagonal entry m_ii is the self-infection rate, i.e. one minus the
        recovery probability of node i)
      - sirs: beta, delta, gamma
      - siv-id / siv-vd: beta, delta, gamma, theta

    For SIV variants gamma = theta = 1 is rejected: the single-node chain
    would alternate S->R->S deterministically and never converge.
    """

    variant: str
    beta: float | None = None
    delta: float | None = None
    gamma: float | None = None
    theta: float | None = None
    contact: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ModelError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}"
            )
        required = _REQUIRED[self.variant]
        for name in ("beta", "delta", "gamma", "theta", "contact"):
            val = getattr(self, name)
            if name in required:
                if val is None:
                    raise ModelError(f"{self.variant} requires {name}")
            elif val is not None:
                raise ModelError(f"{self.variant} does not accept {name}")
        for name in ("beta", "delta", "gamma", "theta"):
            val = getattr(self, name)
            if val is not None and not (0.0 <= val <= 1.0):
                raise ModelError(f"{name}={val} outside [0,1]")
        if self.contact is not None:
            M = np.array(self.contact, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ModelError("contact matrix must be square")
            if np.any(M < 0) or np.any(M > 1):
                raise ModelError("contact matrix entries must be in [0,1]")
            M.setflags(write=False)
            object.__setattr__(self, "contact", M)
        if self.variant.startswith("siv") and self.gamma == 1.0 and self.theta == 1.0:
            raise ModelError(
                "siv with gamma=1 and theta=1 is a period-2 chain; rejected"
            )

    @property
    def k(self) -> int:
        """Number of per-node compartments (2 for SIS family, 3 otherwise)."""
        return 2 if self.variant.startswith("sis") else 3

    def describe(self) -> dict:
        d: dict = {"variant": self.variant}
        for name in ("beta", "delta", "gamma", "theta"):
            val = getattr(self, name)
            if val is not None:
                d[name] = val
        if self.contact is not None:
            d["contact"] = [list(map(float, row)) for row in self.contact]
        return d


def contact_from_rates(graph: Graph, beta: float, delta: float) -> np.ndarray:
    """Contact matrix equivalent to per-edge infection beta*w and recovery delta.

    Off-diagonal entries beta * w_ij on edges, diagonal entries 1 - delta.
    The sis-general chain built from this matrix coincides with the sis-nia
    chain for the same (beta, delta) on the same graph.
    """
    if not (0.0 <= beta <= 1.0 and 0.0 <= delta <= 1.0):
        raise ModelError("beta and delta must be in [0,1]")
    M = beta * graph.adjacency()
    np.fill_diagonal(M, 1.0 - delta)
    return M


# ---------------------------------------------------------------------------
# Threshold ratio and degree stats
# ---------------------------------------------------------------------------

def threshold_ratio(model: ModelSpec, graph: Graph, tol: float = 1e-10) -> float:
    """Local-stability ratio of the disease-free point; < 1 predicts extinction.

    sis-nia / sis-ia / sirs: beta * lambda_max(A) / delta.
    siv-id: (gamma/(gamma+theta)) * beta * lambda_max(A) / delta.
    siv-vd: (1-theta) * (gamma/(gamma+theta)) * beta * lambda_max(A) / delta.
    sis-general: lambda_max(contact).
    Returns +inf when delta = 0 with positive infection pressure.
    """
    if model.variant == "sis-general":
        M = model.contact
        if M.shape[0] != graph.n:
            raise ModelError(
                f"contact matrix is {M.shape[0]}x{M.shape[0]} but graph has n={graph.n}"
            )
        return _matrix_spectral_radius(M, tol)
    lam = spectral_radius(graph, tol).lambda_max
    pressure = model.beta * lam
    if model.variant.startswith("siv"):
        if model.gamma + model.theta == 0.0:
            raise ModelError("siv threshold undefined for gamma = theta = 0")
        pressure *= model.gamma / (model.gamma + model.theta)
        if model.variant == "siv-vd":
            pressure *= 1.0 - model.theta
    if model.delta == 0.0:
        return math.inf if pressure > 0 else 0.0
    return pressure / model.delta


def degree_stats(graph: Graph) -> tuple[int, int, float]:
    """(min degree, max degree, mean degree); degrees are unweighted counts."""
    d = graph.degrees
    return int(d.min()), int(d.max()), float(2.0 * graph.m / graph.n)
