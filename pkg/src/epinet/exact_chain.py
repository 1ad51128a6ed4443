"""Exact k^n-state Markov chains for the six epidemic variants.

Implements:
  - ChainState / DistVector / TransitionMatrix / MarginalVector / MixingReport.
  - node_transition_prob: per-node conditional transition tables.
  - build_transition_matrix: the full product-form transition matrix.
  - propagate, marginals, stationary, tv_distance.
  - mixing_time_exact / mixing_time_bound: exact worst-case mixing time and
    the contraction-norm analytic upper bound.
  - build_R_pair / check_order_preservation: upper-set indicator matrix of
    the componentwise partial order on {0,1}^n, its integer inverse, and the
    order-preservation certificate min(R^-1 S R) >= 0.
  - u_vector / check_u_bound: the product vector u(r)_X = prod_{i in S(X)}
    (1 - r_i) and the one-step comparison S u(r) >= u(Phi(r)).
  - lp_marginal_max: brute-force LP oracle maximizing a next-step infection
    marginal over all joint distributions with prescribed marginals.
  - non_absorption_check: exact survival probability against the
    mean-field product bound.

State encoding: digit i of the base-k code is the compartment of node i
(0 = S, 1 = I, 2 = R), with node 0 the least significant digit.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model_core import (
    Graph,
    ModelSpec,
    ModelError,
    contact_from_rates,
    spectral_radius,
)

logger = logging.getLogger(__name__)

# State-space caps for the dense engine. These bound the enumeration size;
# note that dense K x K matrices become RAM-bound well before the caps
# (around 2^13 / 3^8 states on an 8 GB machine).
STATE_CAP_K2 = 2 ** 16
STATE_CAP_K3 = 3 ** 10

# Brute-force LP caps (basic-feasible-solution enumeration).
LP_N_CAP_K2 = 4
LP_N_CAP_K3 = 3


class ExactChainError(ValueError):
    """Invalid exact-chain request (caps, dimensions, preconditions)."""


class StateSpaceCapError(ExactChainError):
    """State space k^n exceeds the configured cap."""


class LPInfeasibleError(ExactChainError):
    """No joint distribution has the requested marginals."""


class StationaryVerificationError(RuntimeError):
    """Claimed stationary vector fails pi S = pi; signals a matrix bug."""


# ---------------------------------------------------------------------------
# States and basic containers
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def states_table(n: int, k: int) -> np.ndarray:
    """(k^n, n) int8 table; row c column i = digit i of code c (read-only)."""
    codes = np.arange(k ** n, dtype=np.int64)
    D = np.empty((k ** n, n), dtype=np.int8)
    for i in range(n):
        D[:, i] = (codes // (k ** i)) % k
    D.setflags(write=False)
    return D


@dataclass(frozen=True)
class ChainState:
    """One network state: base-k code over n nodes."""

    code: int
    n: int
    k: int = 2

    def __post_init__(self) -> None:
        if not (0 <= self.code < self.k ** self.n):
            raise ExactChainError(
                f"code {self.code} out of range for k={self.k}, n={self.n}"
            )

    @classmethod
    def from_digits(cls, digits, k: int = 2) -> "ChainState":
        code = 0
        for i, d in enumerate(digits):
            if not (0 <= d < k):
                raise ExactChainError(f"digit {d} invalid for k={k}")
            code += int(d) * k ** i
        return cls(code, len(tuple(digits)), k)

    @property
    def digits(self) -> np.ndarray:
        return states_table(self.n, self.k)[self.code].copy()

    @property
    def support(self) -> tuple[int, ...]:
        """Indices of infected nodes (digit == 1)."""
        return tuple(int(i) for i in np.flatnonzero(self.digits == 1))

    @property
    def complement(self) -> "ChainState":
        """Digit flip 0 <-> 1 (defined for k = 2 only)."""
        if self.k != 2:
            raise ExactChainError("complement is defined for k=2 states only")
        return ChainState(self.k ** self.n - 1 - self.code, self.n, self.k)


@dataclass
class DistVector:
    """Probability row vector over the k^n state codes."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=float).copy()
        if e.ndim != 1:
            raise ExactChainError("DistVector entries must be 1-D")
        if e.min(initial=0.0) < -1e-15:
            raise ExactChainError(
                f"negative probability {e.min():.3e} below tolerance"
            )
        np.clip(e, 0.0, None, out=e)
        s = e.sum()
        if abs(s - 1.0) > 1e-12:
            raise ExactChainError(f"probabilities sum to {s!r}, not 1")
        self.entries = e

    @classmethod
    def point_mass(cls, code: int, size: int) -> "DistVector":
        e = np.zeros(size)
        e[code] = 1.0
        return cls(e)

    @classmethod
    def uniform(cls, size: int) -> "DistVector":
        return cls(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class MarginalVector:
    """Per-node occupation probabilities.

    p_i holds P(node infected); p_r holds P(node recovered/vaccinated) and
    is None for 2-compartment variants.
    """

    p_i: np.ndarray
    p_r: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.p_i = np.asarray(self.p_i, dtype=float)
        if np.any(self.p_i < -1e-12) or np.any(self.p_i > 1 + 1e-12):
            raise ExactChainError("infection marginals outside [0,1]")
        if self.p_r is not None:
            self.p_r = np.asarray(self.p_r, dtype=float)
            if np.any(self.p_r < -1e-12) or np.any(self.p_r > 1 + 1e-12):
                raise ExactChainError("recovered marginals outside [0,1]")
            if np.any(self.p_i + self.p_r > 1 + 1e-9):
                raise ExactChainError("p_i + p_r exceeds 1")


@dataclass
class TransitionMatrix:
    """Dense k^n x k^n row-stochastic matrix tagged with its model and graph."""

    entries: np.ndarray
    k: int
    n: int
    model: ModelSpec | None = None
    graph: Graph | None = None

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def to_csv(self, path: str) -> None:
        """Debug export: header line 'k,n', one values line, then the rows."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("k,n\n")
            fh.write(f"{self.k},{self.n}\n")
            for row in self.entries:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path: str) -> "TransitionMatrix":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "k,n":
                raise ExactChainError(f"expected 'k,n' header, got {header!r}")
            k_s, n_s = fh.readline().strip().split(",")
            k, n = int(k_s), int(n_s)
            rows = [
                [float(v) for v in line.strip().split(",")]
                for line in fh
                if line.strip()
            ]
        entries = np.asarray(rows)
        if entries.shape != (k ** n, k ** n):
            raise ExactChainError("matrix shape does not match header")
        return cls(entries, k, n)


# ---------------------------------------------------------------------------
# Per-node conditional probabilities
# ---------------------------------------------------------------------------

def _escape_probs(model: ModelSpec, graph: Graph, infected: np.ndarray,
                  i: int) -> np.ndarray:
    """P(node i receives no infection | state), vectorized over states.

    infected: (K, n) boolean table of digit == 1. Uses per-edge factors
    (1 - beta * w_ij); for sis-general the product runs over every j
    (including i) with factor (1 - m_ij).
    """
    if model.variant == "sis-general":
        M = model.contact
        cols = np.flatnonzero(M[i])
        if len(cols) == 0:
            return np.ones(infected.shape[0])
        return np.prod(
            1.0 - M[i, cols][None, :] * infected[:, cols], axis=1
        )
    nbrs, wts = graph.neighbor_arrays[i]
    if len(nbrs) == 0:
        return np.ones(infected.shape[0])
    return np.prod(
        1.0 - (model.beta * wts)[None, :] * infected[:, nbrs], axis=1
    )


def _node_digit_probs(model: ModelSpec, graph: Graph, D: np.ndarray,
                      i: int) -> np.ndarray:
    """(K, k) array: P(next digit of node i = y | current state), all states."""
    K = D.shape[0]
    k = model.k
    infected = D == 1
    esc = _escape_probs(model, graph, infected, i)
    P = np.zeros((K, k))
    if k == 2:
        cur_inf = infected[:, i]
        if model.variant == "sis-nia":
            # Recovery requires also escaping reinfection within the step.
            p1 = np.where(cur_inf, 1.0 - model.delta * esc, 1.0 - esc)
        elif model.variant == "sis-ia":
            # Recovery is independent of neighbors.
            p1 = np.where(cur_inf, 1.0 - model.delta, 1.0 - esc)
        elif model.variant == "sis-general":
            # The product already includes the self term (1 - m_ii).
            p1 = 1.0 - esc
        else:  # pragma: no cover - guarded by ModelSpec
            raise ModelError(f"unknown k=2 variant {model.variant}")
        P[:, 1] = p1
        P[:, 0] = 1.0 - p1
        return P
    s_m = D[:, i] == 0
    i_m = D[:, i] == 1
    r_m = D[:, i] == 2
    if model.variant == "sirs":
        P[s_m, 0] = esc[s_m]
        P[s_m, 1] = 1.0 - esc[s_m]
    elif model.variant == "siv-id":
        # Vaccination applies only if no infection arrives.
        P[s_m, 0] = esc[s_m] * (1.0 - model.theta)
        P[s_m, 1] = 1.0 - esc[s_m]
        P[s_m, 2] = esc[s_m] * model.theta
    elif model.variant == "siv-vd":
        # Vaccination preempts any arriving infection.
        P[s_m, 0] = esc[s_m] * (1.0 - model.theta)
        P[s_m, 1] = (1.0 - esc[s_m]) * (1.0 - model.theta)
        P[s_m, 2] = model.theta
    else:  # pragma: no cover - guarded by ModelSpec
        raise ModelError(f"unknown k=3 variant {model.variant}")
    P[i_m, 1] = 1.0 - model.delta
    P[i_m, 2] = model.delta
    P[r_m, 0] = model.gamma
    P[r_m, 2] = 1.0 - model.gamma
    return P


def node_transition_prob(model: ModelSpec, graph: Graph, X: ChainState | int,
                         i: int, y: int) -> float:
    """P(next digit of node i = y | current state X), scalar reference path.

    Computed directly from the per-variant tables with the infection-escape
    product over currently infected neighbors (empty product = 1).
    """
    k = model.k
    if isinstance(X, ChainState):
        if X.k != k:
            raise ExactChainError(f"state has k={X.k}, model has k={k}")
        digits = X.digits
    else:
        n = graph.n
        if not (0 <= X < k ** n):
            raise ExactChainError(f"state code {X} out of range")
        digits = states_table(n, k)[X]
    n = len(digits)
    if not (0 <= i < n):
        raise ExactChainError(f"node {i} out of range")
    if not (0 <= y < k):
        raise ExactChainError(f"target digit {y} invalid for a {k}-state variant")
    if model.variant == "sis-general":
        esc = 1.0
        for j in range(n):
            if digits[j] == 1:
                esc *= 1.0 - model.contact[i, j]
        p1 = 1.0 - esc
        return p1 if y == 1 else 1.0 - p1
    nbrs, wts = graph.neighbor_arrays[i]
    esc = 1.0
    for j, w in zip(nbrs, wts):
        if digits[j] == 1:
            esc *= 1.0 - model.beta * w
    cur = int(digits[i])
    if k == 2:
        if cur == 1:
            p1 = 1.0 - model.delta * esc if model.variant == "sis-nia" \
                else 1.0 - model.delta
        else:
            p1 = 1.0 - esc
        return p1 if y == 1 else 1.0 - p1
    if cur == 0:
        if model.variant == "sirs":
            row = (esc, 1.0 - esc, 0.0)
        elif model.variant == "siv-id":
            row = (esc * (1.0 - model.theta), 1.0 - esc, esc * model.theta)
        else:  # siv-vd
            row = (esc * (1.0 - model.theta),
                   (1.0 - esc) * (1.0 - model.theta),
                   model.theta)
    elif cur == 1:
        row = (0.0, 1.0 - model.delta, model.delta)
    else:
        row = (model.gamma, 0.0, 1.0 - model.gamma)
    return row[y]


def _check_cap(model: ModelSpec, n: int) -> None:
    k = model.k
    cap = STATE_CAP_K2 if k == 2 else STATE_CAP_K3
    if k ** n > cap:
        raise StateSpaceCapError(
            f"state space {k}^{n} exceeds cap {cap} "
            f"({'2^16' if k == 2 else '3^10'} states)"
        )


def build_transition_matrix(model: ModelSpec, graph: Graph) -> TransitionMatrix:
    """Full transition matrix S with S[X, Y] = prod_i P(Y_i | X)."""
    n = graph.n
    if model.variant == "sis-general" and model.contact.shape[0] != n:
        raise ModelError("contact matrix dimension does not match graph")
    _check_cap(model, n)
    k = model.k
    D = states_table(n, k)
    K = k ** n
    S = np.ones((K, K))
    for i in range(n):
        P = _node_digit_probs(model, graph, D, i)
        S *= P[:, D[:, i]]
    return TransitionMatrix(S, k, n, model, graph)


# ---------------------------------------------------------------------------
# Propagation, marginals, stationary, TV
# ---------------------------------------------------------------------------

def propagate(mu: DistVector, S: TransitionMatrix, t: int) -> DistVector:
    """mu S^t by repeated vector-matrix products; renormalizes fp drift."""
    if len(mu) != S.size:
        raise ExactChainError("distribution and matrix sizes differ")
    if t < 0:
        raise ExactChainError("t must be >= 0")
    v = mu.entries.copy()
    for _ in range(t):
        v = v @ S.entries
    drift = abs(v.sum() - 1.0)
    if drift > 1e-10:
        logger.warning("propagate drift %.3e after %d steps; renormalized",
                       drift, t)
    elif drift > 0:
        logger.debug("propagate drift %.3e after %d steps", drift, t)
    np.clip(v, 0.0, None, out=v)
    v /= v.sum()
    return DistVector(v)


def marginals(mu: DistVector, model: ModelSpec) -> MarginalVector:
    """Per-node occupation probabilities of a joint distribution."""
    k = model.k
    K = len(mu)
    n = round(math.log(K, k))
    if k ** n != K:
        raise ExactChainError(f"length {K} is not a power of k={k}")
    D = states_table(n, k)
    p_i = mu.entries @ (D == 1)
    if k == 2:
        return MarginalVector(np.clip(p_i, 0.0, 1.0))
    p_r = mu.entries @ (D == 2)
    return MarginalVector(np.clip(p_i, 0.0, 1.0), np.clip(p_r, 0.0, 1.0))


def stationary(model: ModelSpec, graph: Graph) -> DistVector:
    """Stationary distribution, verified against the built matrix.

    SIS family and SIRS: point mass on the all-susceptible state. SIV: the
    per-node product form with single-node weights
    (gamma/(gamma+theta), 0, theta/(gamma+theta)) for (S, I, R);
    requires gamma + theta > 0. Raises StationaryVerificationError if
    pi S differs from pi by more than 1e-10 (which would signal a
    transition-matrix bug).
    """
    S = build_transition_matrix(model, graph)
    K = S.size
    if model.k == 2 or model.variant == "sirs":
        pi = np.zeros(K)
        pi[0] = 1.0
    else:
        if model.gamma + model.theta == 0.0:
            raise ModelError(
                "siv stationary distribution requires gamma + theta > 0"
            )
        ps = model.gamma / (model.gamma + model.theta)
        pr = model.theta / (model.gamma + model.theta)
        D = states_table(graph.n, 3)
        weights = np.array([ps, 0.0, pr])
        pi = np.prod(weights[D], axis=1)
    defect = float(np.abs(pi @ S.entries - pi).max())
    if defect > 1e-10:
        raise StationaryVerificationError(
            f"pi S = pi fails with defect {defect:.3e}"
        )
    return DistVector(pi)


def tv_distance(a: DistVector, b: DistVector) -> float:
    """Total variation distance: half the L1 distance."""
    if len(a) != len(b):
        raise ExactChainError("distributions have different lengths")
    return 0.5 * float(np.abs(a.entries - b.entries).sum())


# ---------------------------------------------------------------------------
# Mixing time
# ---------------------------------------------------------------------------

@dataclass
class MixingReport:
    """Exact mixing time against an analytic contraction bound.

    t_mix is None when the step cap was reached before the total-variation
    target (reported, not raised; expected above threshold).
    """

    t_mix: int | None
    epsilon: float
    bound: float
    worst_initial: ChainState | None
    censored: bool = False


def mixing_time_bound(model: ModelSpec, graph: Graph, epsilon: float) -> float:
    """Analytic mixing-time upper bound log(c*n/eps) / (-log norm).

    The numerator constant c is 1 for 2-compartment variants and 2 for
    3-compartment variants (both marginal blocks must contract). The norm is
    the variant's one-step marginal contraction factor:
      sis-nia / sis-ia: (1-delta) + beta*lambda_max(A)   (exact 2-norm of the
        symmetric matrix (1-delta)I + beta*A, since |1-delta+beta*lambda_min|
        <= 1-delta+beta*lambda_max for adjacency spectra)
      sis-general: largest singular value of the contact matrix
      sirs: largest singular value of the block matrix
        [[(1-gamma)I, delta*I], [0, (1-delta)I + beta*A]]
      siv-id: (1-delta) + beta*lambda_max(A)
      siv-vd: (1-delta) + (1-theta)*beta*lambda_max(A)
    Returns +inf when the norm is >= 1.
    """
    if not (0.0 < epsilon < 1.0):
        raise ExactChainError("epsilon must be in (0,1)")
    n = graph.n
    if model.variant == "sis-general":
        norm = float(np.linalg.norm(model.contact, 2))
        num = n
    elif model.variant in ("sis-nia", "sis-ia"):
        lam = spectral_radius(graph, 1e-12).lambda_max
        norm = (1.0 - model.delta) + model.beta * lam
        num = n
    elif model.variant == "sirs":
        A = graph.adjacency()
        block = np.block([
            [(1.0 - model.gamma) * np.eye(n), model.delta * np.eye(n)],
            [np.zeros((n, n)), (1.0 - model.delta) * np.eye(n) + model.beta * A],
        ])
        norm = float(np.linalg.norm(block, 2))
        num = 2 * n
    else:
        lam = spectral_radius(graph, 1e-12).lambda_max
        eff = model.beta if model.variant == "siv-id" \
            else model.beta * (1.0 - model.theta)
        norm = (1.0 - model.delta) + eff * lam
        num = 2 * n
    if norm >= 1.0:
        return math.inf
    if norm == 0.0:
        return 0.0 if num <= epsilon else 1.0
    return math.log(num / epsilon) / (-math.log(norm))


def mixing_time_exact(S: TransitionMatrix, pi: DistVector, epsilon: float,
                      cap: int = 100000) -> MixingReport:
    """Smallest t with sup over initial states of TV(mu S^t, pi) <= epsilon.

    The sup over all initial distributions is attained at point masses
    because total variation is convex in mu (the sup of a convex function
    over the simplex sits at a vertex), so only the k^n point-mass initials
    are scanned. When pi is a point mass, TV(e_X S^t, pi) = 1 - (S^t)_{X,s0}
    and a single absorption-probability column is iterated; otherwise the
    full matrix power is tracked.

    For the order-preserving SIS variants (sis-nia, sis-general) the
    all-infected state is checked to be a worst-case initial at every step;
    a violation raises, since it would contradict the monotone-coupling
    structure of those chains. The recovery-independent variant sis-ia is
    exempt: it is not order-preserving and its worst initial can be an
    interior state.
    """
    if not (0.0 < epsilon < 1.0):
        raise ExactChainError("epsilon must be in (0,1)")
    if len(pi) != S.size:
        raise ExactChainError("pi and S sizes differ")
    K = S.size
    bound = math.inf
    if S.model is not None and S.graph is not None:
        bound = mixing_time_bound(S.model, S.graph, epsilon)
    if K == 1:
        return MixingReport(0, epsilon, bound, ChainState(0, S.n, S.k)
                            if S.n > 0 else None)
    check_top = S.model is not None and S.model.variant in (
        "sis-nia", "sis-general"
    )
    point = float(pi.entries.max()) >= 1.0 - 1e-12
    if point:
        s0 = int(pi.entries.argmax())
        c = np.zeros(K)
        c[s0] = 1.0
        for t in range(1, cap + 1):
            c = S.entries @ c
            worst = int(c.argmin())
            if check_top and c[K - 1] > c.min() + 1e-12:
                raise ExactChainError(
                    "all-infected start is not the worst initial at "
                    f"t={t} (violates order preservation)"
                )
            if 1.0 - c[worst] <= epsilon:
                return MixingReport(t, epsilon, bound,
                                    ChainState(worst, S.n, S.k))
        worst = int(c.argmin())
        return MixingReport(None, epsilon, bound,
                            ChainState(worst, S.n, S.k), censored=True)
    Dmat = np.eye(K)
    for t in range(1, cap + 1):
        Dmat = Dmat @ S.entries
        tv = 0.5 * np.abs(Dmat - pi.entries[None, :]).sum(axis=1)
        worst = int(tv.argmax())
        if tv[worst] <= epsilon:
            return MixingReport(t, epsilon, bound, ChainState(worst, S.n, S.k))
    worst = int(tv.argmax())
    return MixingReport(None, epsilon, bound, ChainState(worst, S.n, S.k),
                        censored=True)


# ---------------------------------------------------------------------------
# Stochastic-order machinery
# ---------------------------------------------------------------------------

def build_R_pair(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper-set indicator matrix R and its integer inverse over {0,1}^n.

    R[X, Y] = 1 iff X <= Y componentwise (support containment of the codes
    as bitmasks). The inverse has entries (-1)^{|S(Y) \\ S(X)|} on the same
    support; R @ R_inv is the identity in exact integer arithmetic.
    """
    if n < 1:
        raise ExactChainError("n must be >= 1")
    if 2 ** n > STATE_CAP_K2:
        raise StateSpaceCapError(f"2^{n} exceeds cap {STATE_CAP_K2}")
    codes = np.arange(2 ** n, dtype=np.uint64)
    leq = (codes[:, None] | codes[None, :]) == codes[None, :]
    R = leq.astype(np.int64)
    diff = codes[None, :] & ~codes[:, None]
    signs = np.where(np.bitwise_count(diff) % 2 == 0, 1, -1).astype(np.int64)
    R_inv = np.where(leq, signs, 0)
    return R, R_inv


@dataclass
class OrderReport:
    """Certificate data for order preservation of a k=2 chain.

    min_entry: smallest entry of R^-1 S R (>= -1e-12 for order-preserving
    chains). worst_pair: (X, Z) codes attaining it. identity_defect: max
    deviation of R^-1 S R from the complement-chain conditional
    probabilities (NaN for sis-ia, where that identity's derivation does
    not apply). pair_min: smallest coordinate of (mu - mu') S^t R over the
    sampled ordered pairs and horizons.
    """

    min_entry: float
    worst_pair: tuple[int, int]
    identity_defect: float
    pair_min: float


def _mirror_matrix(S: TransitionMatrix) -> np.ndarray | None:
    """Transition matrix of the transposed-contact chain, or None."""
    model, graph = S.model, S.graph
    if model is None or graph is None:
        return None
    if model.variant == "sis-nia":
        M = contact_from_rates(graph, model.beta, model.delta)
    elif model.variant == "sis-general":
        M = np.asarray(model.contact)
    else:
        return None
    mirrored = ModelSpec("sis-general", contact=M.T.copy())
    return build_transition_matrix(mirrored, graph).entries


def check_order_preservation(S: TransitionMatrix, n_pairs: int = 100,
                             t_max: int = 20, seed: int = 0) -> OrderReport:
    """Order-preservation certificate for a 2-compartment chain.

    Computes R^-1 S R and its minimum entry; nonnegative (up to fp noise)
    means the chain maps stochastically ordered distributions to ordered
    distributions. Cross-checks the conjugation identity
    (R^-1 S R)[X, Z] = S'[~Z, ~X], where S' is the chain with transposed
    contact matrix (for sis-nia the contact matrix is symmetric, so S' is
    built from the same rates). Additionally samples n_pairs ordered pairs
    mu <= mu' (mass moved from a state X up to some Y >= X) and records the
    smallest coordinate of (mu - mu') S^t R for t = 1..t_max.
    """
    if S.k != 2:
        raise ExactChainError("order machinery applies to k=2 chains only")
    n = S.n
    K = S.size
    R, R_inv = build_R_pair(n)
    C = R_inv @ S.entries @ R
    flat = int(C.argmin())
    worst_pair = (flat // K, flat % K)
    min_entry = float(C.min())

    mirror = _mirror_matrix(S)
    if mirror is None:
        identity_defect = math.nan
    else:
        comp = np.arange(K - 1, -1, -1)
        expected = mirror[np.ix_(comp, comp)].T
        identity_defect = float(np.abs(C - expected).max())

    pair_min = math.nan
    if n_pairs > 0:
        rng = np.random.default_rng(seed)
        pair_min = math.inf
        for _ in range(n_pairs):
            mu = rng.random(K)
            mu /= mu.sum()
            X = int(rng.integers(K))
            up = int(rng.integers(K))
            Y = X | up
            if Y == X:
                Y = K - 1  # move to the top state instead
            eps = float(rng.uniform(0.0, mu[X]))
            v = np.zeros(K)
            v[X] += eps
            v[Y] -= eps
            # v = mu - mu'; every coordinate of v S^t R must stay >= 0.
            for _t in range(1, t_max + 1):
                v = v @ S.entries
                pair_min = min(pair_min, float((v @ R).min()))
    return OrderReport(min_entry, worst_pair, identity_defect, pair_min)


# ---------------------------------------------------------------------------
# u(r) bound
# ---------------------------------------------------------------------------

def u_vector(r: np.ndarray) -> np.ndarray:
    """u(r)_X = prod over infected nodes i of (1 - r_i), as a column.

    u(all ones) is the indicator of the all-susceptible state; u(0) is the
    all-ones vector. Not normalized.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > 1):
        raise ExactChainError("r must be componentwise in [0,1]")
    n = len(r)
    D = states_table(n, 2)
    return np.prod(np.where(D == 1, 1.0 - r[None, :], 1.0), axis=1)


def check_u_bound(S: TransitionMatrix, model: ModelSpec, graph: Graph,
                  r: np.ndarray) -> float:
    """min over states of (S u(r) - u(Phi(r))); >= -1e-12 when the one-step
    mean-field map dominates the chain's healthy-set probabilities.

    Defined for the sis-nia map Phi.
    """
    if model.variant != "sis-nia":
        raise ExactChainError("u-bound comparison is defined for sis-nia")
    from .mean_field import MeanFieldPoint, mf_step

    r = np.asarray(r, dtype=float)
    lhs = S.entries @ u_vector(r)
    phi_r = mf_step(model, graph, MeanFieldPoint(r)).p_i
    rhs = u_vector(phi_r)
    return float((lhs - rhs).min())


# ---------------------------------------------------------------------------
# LP marginal bound
# ---------------------------------------------------------------------------

@dataclass
class LPReport:
    """Brute-force LP maximum of a next-step infection marginal.

    lp_max: exact optimum over all joint distributions with the prescribed
    marginals. closed_form: the linear upper bound evaluated on the same
    marginals. bases_checked / bases_feasible: enumeration statistics.
    """

    lp_max: float
    closed_form: float
    bases_checked: int
    bases_feasible: int


def _marginal_constraint_matrix(n: int, k: int) -> np.ndarray:
    """Columns: [1, R-marginal indicators (k=3 only), I-marginal indicators]."""
    D = states_table(n, k)
    cols = [np.ones(k ** n)]
    if k == 3:
        cols.extend((D[:, j] == 2).astype(float) for j in range(n))
    cols.extend((D[:, j] == 1).astype(float) for j in range(n))
    return np.column_stack(cols)


def closed_form_marginal_bound(model: ModelSpec, graph: Graph, i: int,
                               p: MarginalVector) -> float:
    """Linear next-step bound on node i's infection marginal.

    (1-delta) p_i + sum over neighbors of beta w_ij p_j, with the extra
    (1-theta) infection factor for siv-vd, and the contact-matrix row for
    sis-general.
    """
    pi_vec = np.asarray(p.p_i, dtype=float)
    if model.variant == "sis-general":
        return float(model.contact[i] @ pi_vec)
    nbrs, wts = graph.neighbor_arrays[i]
    inf_factor = model.beta * (1.0 - model.theta) \
        if model.variant == "siv-vd" else model.beta
    acc = (1.0 - model.delta) * pi_vec[i]
    if len(nbrs):
        acc += float((inf_factor * wts) @ pi_vec[nbrs])
    return float(acc)


def lp_marginal_max(model: ModelSpec, graph: Graph, i: int,
                    p: MarginalVector, chunk: int = 20000) -> LPReport:
    """Exact maximum of node i's next-step infection marginal over all joint
    distributions mu with the prescribed per-node marginals.

    The equality-constrained LP  max c.mu  s.t.  mu >= 0, B^T mu = (1, p)
    is solved by enumerating basic feasible solutions: every subset of m
    columns (m = number of constraints), solving the square system, and
    keeping nonnegative solutions. The feasible region is a polytope, so
    the optimum is attained at one of them. This oracle shares nothing with
    the closed-form bound it is compared against.

    Raises LPInfeasibleError when no basic feasible solution exists (which
    for a full-row-rank constraint matrix is equivalent to infeasibility).
    """
    n = graph.n
    k = model.k
    cap = LP_N_CAP_K2 if k == 2 else LP_N_CAP_K3
    if n > cap:
        raise ExactChainError(
            f"LP enumeration capped at n <= {cap} for k={k} (got n={n})"
        )
    if not (0 <= i < n):
        raise ExactChainError(f"node {i} out of range")
    S = build_transition_matrix(model, graph)
    D = states_table(n, k)
    B = _marginal_constraint_matrix(n, k)
    m = B.shape[1]
    K = k ** n
    if k == 2:
        beq = np.concatenate(([1.0], np.asarray(p.p_i, dtype=float)))
    else:
        if p.p_r is None:
            raise ExactChainError("k=3 LP requires recovered marginals")
        beq = np.concatenate(
            ([1.0], np.asarray(p.p_r, dtype=float), np.asarray(p.p_i, dtype=float))
        )
    c = S.entries @ (D[:, i] == 1).astype(float)

    best = -math.inf
    checked = 0
    feasible = 0
    combos_iter = itertools.combinations(range(K), m)
    while True:
        block = list(itertools.islice(combos_iter, chunk))
        if not block:
            break
        idx = np.asarray(block, dtype=np.int64)
        checked += len(idx)
        # Basis matrices: columns of B^T = rows of B at the chosen indices.
        mats = B[idx, :].transpose(0, 2, 1)
        dets = np.linalg.det(mats)
        ok = np.abs(dets) > 0.5  # 0/1 matrices: nonsingular => |det| >= 1
        if not ok.any():
            continue
        rhs = np.broadcast_to(beq[:, None], (int(ok.sum()), m, 1))
        sols = np.linalg.solve(mats[ok], rhs)[..., 0]
        nonneg = (sols >= -1e-10).all(axis=1)
        if not nonneg.any():
            continue
        feasible += int(nonneg.sum())
        vals = (c[idx[ok]] * sols).sum(axis=1)[nonneg]
        best = max(best, float(vals.max()))
    if feasible == 0:
        raise LPInfeasibleError(
            "no joint distribution matches the requested marginals"
        )
    cf = closed_form_marginal_bound(model, graph, i, p)
    return LPReport(best, cf, checked, feasible)


# ---------------------------------------------------------------------------
# Non-absorption bound
# ---------------------------------------------------------------------------

@dataclass
class NonAbsorptionReport:
    """Exact survival probability vs. the mean-field product bound."""

    exact: float
    bound: float
    slack: float


def non_absorption_check(model: ModelSpec, graph: Graph,
                         X0: ChainState | int, t: int) -> NonAbsorptionReport:
    """P(chain not absorbed by step t | start X0) against the product bound
    1 - prod over initially infected i of (1 - Phi^t_i(all-ones)).

    Defined for sis-nia. slack = bound - exact must be >= -1e-10.
    """
    if model.variant != "sis-nia":
        raise ExactChainError("non-absorption bound is defined for sis-nia")
    from .mean_field import MeanFieldPoint, mf_step

    n = graph.n
    code = X0.code if isinstance(X0, ChainState) else int(X0)
    S = build_transition_matrix(model, graph)
    mu = propagate(DistVector.point_mass(code, S.size), S, t)
    exact = 1.0 - float(mu.entries[0])
    x = np.ones(n)
    for _ in range(t):
        x = mf_step(model, graph, MeanFieldPoint(x)).p_i
    support = states_table(n, 2)[code] == 1
    bound = 1.0 - float(np.prod(1.0 - x[support]))
    return NonAbsorptionReport(exact, bound, bound - exact)
