"""Mean-field maps, linearizations, Jacobians, fixed points, and stability.

The mean-field approximation replaces the joint chain distribution by
independent per-node marginals, giving an n-dimensional (2-compartment) or
2n-dimensional (3-compartment) synchronous map:

  sis-nia:  x_i' = 1 - Pi_i(x) (1 - (1-delta) x_i)
  sis-ia:   x_i' = (1-delta) x_i + (1 - x_i)(1 - Pi_i(x))
  sis-general: x_i' = 1 - prod_j (1 - m_ij x_j)
  sirs:     r_i' = (1-gamma) r_i + delta p_i
            p_i' = (1-delta) p_i + (1 - Pi_i(p)) s_i
  siv-id:   r_i' = (1-gamma) r_i + delta p_i + theta Pi_i(p) s_i
            p_i' as sirs
  siv-vd:   r_i' = (1-gamma) r_i + delta p_i + theta s_i
            p_i' = (1-delta) p_i + (1-theta)(1 - Pi_i(p)) s_i

with Pi_i(x) = prod over neighbors j of (1 - beta w_ij x_j) and
s_i = 1 - r_i - p_i. Implements mf_step, mf_linear_model, mf_jacobian,
mf_iterate, find_fixed_point, classify_stability, perron_certificate, and
linear_bound_check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model_core import (
    Graph,
    ModelSpec,
    ModelError,
    _power_iteration,
    spectral_radius,
    threshold_ratio,
)


class MeanFieldError(ValueError):
    """Invalid mean-field request."""


class CertificateError(RuntimeError):
    """A spectral certificate failed its componentwise check."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass
class MeanFieldPoint:
    """Per-node probabilities: p_i infection, p_r recovered (3-compartment).

    p_r is None for 2-compartment variants. Values are validated to [0,1]
    (1e-9 slop for accumulated rounding, then clipped) and p_i + p_r <= 1.
    """

    p_i: np.ndarray
    p_r: np.ndarray | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.p_i, dtype=float).copy()
        if p.ndim != 1:
            raise MeanFieldError("p_i must be a 1-D vector")
        if p.min(initial=0.0) < -1e-9 or p.max(initial=0.0) > 1 + 1e-9:
            raise MeanFieldError(f"p_i outside [0,1]: range "
                                 f"[{p.min()}, {p.max()}]")
        np.clip(p, 0.0, 1.0, out=p)
        self.p_i = p
        if self.p_r is not None:
            r = np.asarray(self.p_r, dtype=float).copy()
            if r.shape != p.shape:
                raise MeanFieldError("p_r and p_i must have the same length")
            if r.min(initial=0.0) < -1e-9 or r.max(initial=0.0) > 1 + 1e-9:
                raise MeanFieldError("p_r outside [0,1]")
            np.clip(r, 0.0, 1.0, out=r)
            if np.any(p + r > 1 + 1e-9):
                raise MeanFieldError("p_i + p_r exceeds 1")
            self.p_r = r

    @property
    def k(self) -> int:
        return 2 if self.p_r is None else 3

    @property
    def n(self) -> int:
        return len(self.p_i)

    def concat(self) -> np.ndarray:
        """(p_r, p_i) concatenation for k=3; p_i alone for k=2."""
        if self.p_r is None:
            return self.p_i.copy()
        return np.concatenate([self.p_r, self.p_i])

    @classmethod
    def from_concat(cls, v: np.ndarray, k: int) -> "MeanFieldPoint":
        v = np.asarray(v, dtype=float)
        if k == 2:
            return cls(v.copy())
        n = len(v) // 2
        return cls(v[n:].copy(), v[:n].copy())


@dataclass
class LinearModel:
    """Linearization matrix at the variant's disease-free base point.

    For 2-compartment variants the n x n matrix (1-delta) I + beta A (or
    the contact matrix itself). For 3-compartment variants the 2n x 2n block
    matrix in (recovered, infected) coordinate order, as conventionally
    printed: upper-triangular with the infected-block diagonal carrying the
    threshold spectrum. Note for siv-vd the printed upper-right block
    (delta-theta) I - theta P_S* beta A differs from the true derivative of
    the map (which has no adjacency term there); both have the same
    spectrum because the matrix is block-triangular. mf_jacobian returns
    the true derivative.
    """

    matrix: np.ndarray
    base_point: MeanFieldPoint


@dataclass
class FixedPointReport:
    """Fixed-point solver output.

    classification: 'disease-free', 'endemic', 'cycle(q)', or
    'non-converged'. residual is the infinity norm of point - map(point).
    relation_defect (3-compartment endemic points only) is the defect of the
    variant's affine recovered-vs-infected marginal relation at the point.
    """

    point: MeanFieldPoint
    residual: float
    iterations: int
    classification: str
    jacobian_spectrum: np.ndarray | None = None
    relation_defect: float | None = None


@dataclass
class StabilityReport:
    spectral_radius: float
    stable: bool
    largest_real_eigenvalue: float


# ---------------------------------------------------------------------------
# Escape products
# ---------------------------------------------------------------------------

def _neighbor_products(graph: Graph, beta: float, x: np.ndarray) -> np.ndarray:
    """Pi_i = prod over neighbors j of (1 - beta w_ij x_j), all nodes."""
    n = graph.n
    if not graph.is_weighted and n > 256:
        # log-product fast path; exp(-inf) = 0 handles beta x_j = 1.
        with np.errstate(divide="ignore"):
            logs = np.log1p(-beta * x)
        return np.exp(graph.adjacency_sparse @ logs)
    out = np.ones(n)
    for i in range(n):
        nbrs, wts = graph.neighbor_arrays[i]
        if len(nbrs):
            out[i] = np.prod(1.0 - beta * wts * x[nbrs])
    return out


def _leave_one_out(f: np.ndarray, prod: float) -> np.ndarray:
    """L_j = prod of f excluding f_j, robust to near-zero factors."""
    if not np.any(f <= 1e-12):
        return prod / f
    L = np.empty_like(f)
    for j in range(len(f)):
        mask = np.ones(len(f), dtype=bool)
        mask[j] = False
        L[j] = np.prod(f[mask])
    return L


# ---------------------------------------------------------------------------
# The maps
# ---------------------------------------------------------------------------

def mf_step(model: ModelSpec, graph: Graph, x: MeanFieldPoint) -> MeanFieldPoint:
    """One synchronous application of the variant's mean-field map."""
    if x.n != graph.n:
        raise MeanFieldError(f"point has n={x.n}, graph has n={graph.n}")
    if x.k != model.k:
        raise MeanFieldError(
            f"point has {x.k} compartments, model {model.variant} has {model.k}"
        )
    p = x.p_i
    if model.variant == "sis-general":
        M = model.contact
        if M.shape[0] != graph.n:
            raise ModelError("contact matrix dimension does not match graph")
        new = 1.0 - np.prod(1.0 - M * p[None, :], axis=1)
        return MeanFieldPoint(new)
    Pi = _neighbor_products(graph, model.beta, p)
    if model.variant == "sis-nia":
        return MeanFieldPoint(1.0 - Pi * (1.0 - (1.0 - model.delta) * p))
    if model.variant == "sis-ia":
        return MeanFieldPoint((1.0 - model.delta) * p + (1.0 - p) * (1.0 - Pi))
    r = x.p_r
    s = 1.0 - r - p
    np.clip(s, 0.0, 1.0, out=s)
    new_i_core = (1.0 - model.delta) * p
    xi = 1.0 - Pi
    if model.variant == "sirs":
        new_r = (1.0 - model.gamma) * r + model.delta * p
        new_i = new_i_core + xi * s
    elif model.variant == "siv-id":
        new_r = (1.0 - model.gamma) * r + model.delta * p + model.theta * Pi * s
        new_i = new_i_core + xi * s
    else:  # siv-vd
        new_r = (1.0 - model.gamma) * r + model.delta * p + model.theta * s
        new_i = new_i_core + (1.0 - model.theta) * xi * s
    return MeanFieldPoint(new_i, new_r)


def siv_base_point(model: ModelSpec, n: int) -> MeanFieldPoint:
    """Disease-free point of the SIV variants: p_r = theta/(gamma+theta)."""
    if model.gamma + model.theta == 0.0:
        raise ModelError("siv base point requires gamma + theta > 0")
    pr = model.theta / (model.gamma + model.theta)
    return MeanFieldPoint(np.zeros(n), np.full(n, pr))


def mf_linear_model(model: ModelSpec, graph: Graph) -> LinearModel:
    """The variant's linearization matrix at its disease-free base point."""
    n = graph.n
    A = graph.adjacency()
    if model.variant == "sis-general":
        return LinearModel(np.array(model.contact, dtype=float),
                           MeanFieldPoint(np.zeros(n)))
    if model.k == 2:
        return LinearModel(
            (1.0 - model.delta) * np.eye(n) + model.beta * A,
            MeanFieldPoint(np.zeros(n)),
        )
    if model.variant == "sirs":
        top = np.hstack([(1.0 - model.gamma) * np.eye(n),
                         model.delta * np.eye(n)])
        bot = np.hstack([np.zeros((n, n)),
                         (1.0 - model.delta) * np.eye(n) + model.beta * A])
        return LinearModel(np.vstack([top, bot]),
                           MeanFieldPoint(np.zeros(n), np.zeros(n)))
    base = siv_base_point(model, n)
    ps = model.gamma / (model.gamma + model.theta)
    tr = (model.delta - model.theta) * np.eye(n) \
        - model.theta * ps * model.beta * A
    eff = ps if model.variant == "siv-id" else (1.0 - model.theta) * ps
    top = np.hstack([(1.0 - model.gamma - model.theta) * np.eye(n), tr])
    bot = np.hstack([np.zeros((n, n)),
                     (1.0 - model.delta) * np.eye(n) + eff * model.beta * A])
    return LinearModel(np.vstack([top, bot]), base)


def mf_jacobian(model: ModelSpec, graph: Graph, x: MeanFieldPoint) -> np.ndarray:
    """Analytic Jacobian of the mean-field map at x.

    2-compartment variants: n x n. 3-compartment variants: 2n x 2n in
    (recovered, infected) coordinate order, matching MeanFieldPoint.concat.
    Neighbor derivative terms use leave-one-out escape products, which stay
    valid when some factor 1 - beta w_ij x_j is zero.
    """
    if x.n != graph.n or x.k != model.k:
        raise MeanFieldError("point does not match model/graph dimensions")
    n = graph.n
    p = x.p_i
    if model.variant == "sis-general":
        M = np.asarray(model.contact, dtype=float)
        J = np.zeros((n, n))
        for i in range(n):
            f = 1.0 - M[i] * p
            prod = float(np.prod(f))
            if np.any(f <= 1e-12):
                L = _leave_one_out(f, prod)
            else:
                L = prod / f
            J[i] = M[i] * L
        return J

    beta = model.beta
    Pi = np.ones(n)
    # Per-node factors and leave-one-out products over neighbor lists.
    loo: list[tuple[np.ndarray, np.ndarray]] = []
    for i in range(n):
        nbrs, wts = graph.neighbor_arrays[i]
        f = 1.0 - beta * wts * p[nbrs]
        prod = float(np.prod(f)) if len(f) else 1.0
        Pi[i] = prod
        if len(f) and np.any(f <= 1e-12):
            L = _leave_one_out(f, prod)
        elif len(f):
            L = prod / f
        else:
            L = np.empty(0)
        loo.append((nbrs, beta * wts * L))

    if model.k == 2:
        J = np.zeros((n, n))
        if model.variant == "sis-nia":
            for i in range(n):
                nbrs, dPi = loo[i]
                J[i, nbrs] = dPi * (1.0 - (1.0 - model.delta) * p[i])
                J[i, i] = (1.0 - model.delta) * Pi[i]
        else:  # sis-ia
            for i in range(n):
                nbrs, dPi = loo[i]
                J[i, nbrs] = dPi * (1.0 - p[i])
                J[i, i] = (1.0 - model.delta) - (1.0 - Pi[i])
        return J

    r = x.p_r
    s = np.clip(1.0 - r - p, 0.0, 1.0)
    xi = 1.0 - Pi
    J = np.zeros((2 * n, 2 * n))
    R, I = slice(0, n), slice(n, 2 * n)
    # Infected rows (same for sirs and siv-id; scaled by 1-theta for siv-vd).
    scale = (1.0 - model.theta) if model.variant == "siv-vd" else 1.0
    JIr = np.zeros((n, n))
    JIi = np.zeros((n, n))
    for i in range(n):
        nbrs, dPi = loo[i]
        JIi[i, nbrs] = scale * s[i] * dPi
        JIi[i, i] += (1.0 - model.delta) - scale * xi[i]
        JIr[i, i] = -scale * xi[i]
    J[I, R] = JIr
    J[I, I] = JIi
    # Recovered rows.
    if model.variant == "sirs":
        J[R, R] = (1.0 - model.gamma) * np.eye(n)
        J[R, I] = model.delta * np.eye(n)
    elif model.variant == "siv-id":
        JRr = np.diag((1.0 - model.gamma) - model.theta * Pi)
        JRi = np.zeros((n, n))
        for i in range(n):
            nbrs, dPi = loo[i]
            JRi[i, nbrs] = -model.theta * s[i] * dPi
            JRi[i, i] += model.delta - model.theta * Pi[i]
        J[R, R] = JRr
        J[R, I] = JRi
    else:  # siv-vd
        J[R, R] = (1.0 - model.gamma - model.theta) * np.eye(n)
        J[R, I] = (model.delta - model.theta) * np.eye(n)
    return J


def mf_iterate(model: ModelSpec, graph: Graph, x0: MeanFieldPoint,
               t: int) -> list[MeanFieldPoint]:
    """Deterministic trajectory [x0, F(x0), ..., F^t(x0)]."""
    if t < 0:
        raise MeanFieldError("t must be >= 0")
    traj = [x0]
    x = x0
    for _ in range(t):
        x = mf_step(model, graph, x)
        traj.append(x)
    return traj


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------

def _upper_corner(model: ModelSpec, n: int) -> MeanFieldPoint:
    if model.k == 2:
        return MeanFieldPoint(np.ones(n))
    return MeanFieldPoint(np.ones(n), np.zeros(n))


def _relation_defect(model: ModelSpec, pt: MeanFieldPoint) -> float | None:
    """Defect of the variant's affine recovered-infected relation.

    At a fixed point the recovered marginals are an affine function of the
    infected marginals: sirs p_r = (delta/gamma) p_i (gamma > 0); siv-id
    p_r = [theta + (delta - theta - delta*theta) p_i] / (gamma + theta);
    siv-vd p_r = [theta + (delta - theta) p_i] / (gamma + theta).
    """
    if model.k != 3 or pt.p_r is None:
        return None
    if model.variant == "sirs":
        if model.gamma == 0.0:
            return None
        pred = (model.delta / model.gamma) * pt.p_i
    else:
        gt = model.gamma + model.theta
        if gt == 0.0:
            return None
        if model.variant == "siv-id":
            slope = model.delta - model.theta - model.delta * model.theta
        else:
            slope = model.delta - model.theta
        pred = (model.theta + slope * pt.p_i) / gt
    return float(np.abs(pt.p_r - pred).max())


def find_fixed_point(model: ModelSpec, graph: Graph, tol: float = 1e-10,
                     cap: int = 100000, damping: float | None = None,
                     x0: MeanFieldPoint | None = None,
                     compute_spectrum: bool = True) -> FixedPointReport:
    """Fixed point of the mean-field map.

    sis-nia and sis-general iterate the raw map from the all-ones corner;
    successive iterates are then provably componentwise decreasing, which is
    asserted each step (when starting from a custom x0 the assertion is
    skipped). The remaining variants use damped iteration
    x <- (1-eta) x + eta F(x) with eta = 0.5 from the upper corner
    (p_i = all ones, p_r = 0), because their raw maps can oscillate; pass
    damping=1.0 to reproduce cycles.

    Cycle detection: if an iterate recurs (within 1e-9) at lag q <= 64
    while the residual is still above tol and the trajectory swings by more
    than 1e-6 within the period (distinguishing a cycle from slow
    convergence), classification is 'cycle(q)'. Cycles of smaller amplitude
    are reported as 'non-converged' at the cap.
    Classification is 'disease-free' when the converged infection norm is
    below max(tol, 1e-8) (the iteration cannot distinguish exact zero from
    geometric decay truncated at residual tol), else 'endemic'.
    """
    if tol <= 0:
        raise MeanFieldError("tol must be > 0")
    n = graph.n
    monotone = model.variant in ("sis-nia", "sis-general")
    if damping is None:
        damping = 1.0 if monotone else 0.5
    assert_decreasing = monotone and x0 is None and damping == 1.0
    x = x0 if x0 is not None else _upper_corner(model, n)
    vec = x.concat()
    history: list[np.ndarray] = [vec]
    classify_eps = max(tol, 1e-8)
    it = 0
    residual = math.inf
    classification = "non-converged"
    for it in range(1, cap + 1):
        fx = mf_step(model, graph, x)
        fvec = fx.concat()
        residual = float(np.abs(fvec - vec).max())
        nvec = vec + damping * (fvec - vec)
        if assert_decreasing and np.any(nvec > vec + 1e-12):
            raise MeanFieldError(
                "monotone iteration increased a coordinate; map bug"
            )
        if residual < tol:
            x = fx
            vec = fvec
            classification = "converged"
            break
        cycle_q = 0
        nv_res = None
        for q in range(2, min(len(history), 64) + 1):
            if np.abs(nvec - history[-q]).max() < 1e-9:
                # Candidate period q. A slowly converging trajectory also
                # recurs within 1e-9; a genuine cycle must additionally
                # swing by a macroscopic amplitude within the period.
                amplitude = max(
                    float(np.abs(nvec - history[-j]).max())
                    for j in range(1, q)
                )
                if amplitude <= 1e-6:
                    break
                nv_res = float(
                    np.abs(mf_step(model, graph,
                                   MeanFieldPoint.from_concat(nvec, model.k)
                                   ).concat() - nvec).max()
                )
                if nv_res > tol:
                    cycle_q = q
                break
        x = MeanFieldPoint.from_concat(nvec, model.k)
        vec = nvec
        if cycle_q:
            classification = f"cycle({cycle_q})"
            residual = nv_res
            break
        history.append(vec)
        if len(history) > 65:
            history.pop(0)
    if classification == "converged":
        inf_norm = float(np.abs(x.p_i).max())
        classification = "disease-free" if inf_norm < classify_eps else "endemic"
    spectrum = None
    if compute_spectrum:
        spectrum = np.linalg.eigvals(mf_jacobian(model, graph, x))
    defect = _relation_defect(model, x) if classification == "endemic" else None
    return FixedPointReport(x, residual, it, classification, spectrum, defect)


def classify_stability(model: ModelSpec, graph: Graph, point: MeanFieldPoint,
                       fixed_tol: float = 1e-6) -> StabilityReport:
    """Spectral stability of the map at a fixed point.

    Asserts the point is fixed within fixed_tol first. stable means the
    Jacobian spectral radius is < 1. largest_real_eigenvalue is the largest
    eigenvalue with negligible imaginary part (-inf when the spectrum has
    no real eigenvalue).
    """
    res = float(np.abs(mf_step(model, graph, point).concat()
                       - point.concat()).max())
    if res > fixed_tol:
        raise MeanFieldError(
            f"point is not fixed (residual {res:.3e} > {fixed_tol:.1e})"
        )
    eigs = np.linalg.eigvals(mf_jacobian(model, graph, point))
    rho = float(np.abs(eigs).max()) if len(eigs) else 0.0
    real = eigs[np.abs(eigs.imag) <= 1e-9].real
    largest_real = float(real.max()) if len(real) else -math.inf
    return StabilityReport(rho, rho < 1.0, largest_real)


def perron_certificate(model: ModelSpec, graph: Graph) -> np.ndarray | None:
    """Above-threshold instability certificate, or None below threshold.

    When the threshold ratio exceeds 1, returns the Perron vector v of the
    effective linearized infection matrix and asserts the componentwise
    growth condition (c beta A - delta I) v > 0, where c is the variant's
    susceptible-depletion factor (1 for SIS/SIRS, gamma/(gamma+theta) for
    siv-id, with another (1-theta) for siv-vd). For sis-general the
    condition is (M - I) v > 0.
    """
    ratio = threshold_ratio(model, graph)
    if ratio <= 1.0:
        return None
    if model.variant == "sis-general":
        M = np.asarray(model.contact, dtype=float)
        _, _, v = _power_iteration(lambda y: M @ y, M.shape[0], 1e-13)
        growth = M @ v - v
    else:
        rep = spectral_radius(graph, 1e-13)
        v = rep.eigvec
        c = 1.0
        if model.variant.startswith("siv"):
            c = model.gamma / (model.gamma + model.theta)
            if model.variant == "siv-vd":
                c *= 1.0 - model.theta
        A = graph.adjacency() if graph.n <= 400 else graph.adjacency_sparse
        growth = c * model.beta * (A @ v) - model.delta * v
    if growth.min() <= 1e-12:
        raise CertificateError(
            f"growth certificate failed: min component {growth.min():.3e}"
        )
    return v


def linear_bound_check(model: ModelSpec, graph: Graph,
                       x: MeanFieldPoint) -> float:
    """min over nodes of (linear map - nonlinear map) on infection coords.

    The linearized infection update dominates the nonlinear one on [0,1]^n;
    the returned slack must be >= -1e-12. The linear form uses only the
    infection marginals: (1-delta) p + beta A p, with the contact row for
    sis-general and the extra (1-theta) for siv-vd.
    """
    p = x.p_i
    if model.variant == "sis-general":
        lin = np.asarray(model.contact, dtype=float) @ p
    else:
        A = graph.adjacency()
        eff = model.beta * (1.0 - model.theta) \
            if model.variant == "siv-vd" else model.beta
        lin = (1.0 - model.delta) * p + eff * (A @ p)
    nonlin = mf_step(model, graph, x).p_i
    return float((lin - nonlin).min())
