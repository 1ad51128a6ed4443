"""Machine-verification suites for the chain and mean-field guarantees.

Each suite brute-forces one family of claims on small random instances and
returns a SuiteResult with enough serialized detail to replay any failure:

  ordering        R-matrix identities, nonnegativity of the conjugated
                  transition matrix, and order preservation on sampled
                  ordered distribution pairs (sis-nia and sis-general).
  u-bound         S u(r) dominates u(mean-field step of r) componentwise.
  lp              brute-force LP marginal optimum vs closed-form bound,
                  with equality on the small-marginal family.
  non-absorption  exact survival probability vs mean-field product bound.
  linear          linearized infection update dominates the nonlinear map.
  jacobian        analytic Jacobians vs central finite differences.
  stability-er    endemic fixed-point stability rate on ER graphs with
                  p = 2 ln(n)/n at n in {200, 400, 800}.
  mixing          exact mixing time <= ceil(analytic contraction bound)
                  on below-threshold instances of every variant.
  stationary      SIV product-form stationary vector: pi S = pi.
  fixed-point     affine recovered-vs-infected relations at endemic points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model_core import Graph, ModelSpec, contact_from_rates, format_edge_list, \
    generate, spectral_radius, threshold_ratio
from .exact_chain import (
    build_R_pair,
    build_transition_matrix,
    check_order_preservation,
    check_u_bound,
    closed_form_marginal_bound,
    lp_marginal_max,
    mixing_time_bound,
    mixing_time_exact,
    non_absorption_check,
    stationary,
)
from .mean_field import (
    MeanFieldPoint,
    find_fixed_point,
    linear_bound_check,
    mf_jacobian,
    mf_step,
)

SUITES = (
    "ordering",
    "u-bound",
    "lp",
    "non-absorption",
    "linear",
    "jacobian",
    "stability-er",
    "mixing",
    "stationary",
    "fixed-point",
)


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    checks: int
    failures: list[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures,
            "details": self.details,
        }


class VerifyError(ValueError):
    """Unknown suite or bad suite parameters."""


# ---------------------------------------------------------------------------
# Instance generation
# ---------------------------------------------------------------------------

def _random_graph(rng: np.random.Generator, n_max: int, n_min: int = 2,
                  weighted_prob: float = 0.3) -> Graph:
    """Random connected graph, occasionally with random edge weights."""
    n = int(rng.integers(n_min, n_max + 1))
    g = None
    for _ in range(30):
        p = float(rng.uniform(0.4, 0.9))
        cand = generate("er", n=n, p=p, seed=int(rng.integers(2 ** 31)))
        if cand.m > 0 and cand.is_connected():
            g = cand
            break
    if g is None:
        g = generate("complete", n=n)
    if rng.random() < weighted_prob and g.m:
        w = tuple(float(x) for x in rng.uniform(0.2, 1.0, g.m))
        g = Graph(g.n, g.edges, w)
    return g


def _graph_payload(g: Graph) -> str:
    return format_edge_list(g)


def _random_contact(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.uniform(0.0, 1.0, (n, n))
    M[rng.random((n, n)) < 0.3] = 0.0
    return M


def _fail(failures: list, **info) -> None:
    failures.append({k: (v.tolist() if isinstance(v, np.ndarray) else v)
                     for k, v in info.items()})


def fd_jacobian(model: ModelSpec, graph: Graph, x: MeanFieldPoint,
                h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the mean-field map at x."""
    v0 = x.concat()
    d = len(v0)
    J = np.empty((d, d))
    for j in range(d):
        vp = v0.copy()
        vm = v0.copy()
        vp[j] += h
        vm[j] -= h
        fp = mf_step(model, graph, MeanFieldPoint.from_concat(vp, model.k))
        fm = mf_step(model, graph, MeanFieldPoint.from_concat(vm, model.k))
        J[:, j] = (fp.concat() - fm.concat()) / (2.0 * h)
    return J


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def _suite_ordering(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    min_entry = math.inf
    pair_min = math.inf
    identity_defect = 0.0
    checks = 0
    for trial in range(trials):
        g = _random_graph(rng, min(n_max, 6), weighted_prob=0.25)
        n = g.n
        if trial % 2 == 0:
            model = ModelSpec("sis-nia", beta=float(rng.uniform(0.05, 0.95)),
                              delta=float(rng.uniform(0.05, 0.95)))
        else:
            model = ModelSpec("sis-general", contact=_random_contact(rng, n))
        S = build_transition_matrix(model, g)
        R, R_inv = build_R_pair(n)
        K = 2 ** n
        defect_id = int(np.abs(R @ R_inv - np.eye(K, dtype=np.int64)).max())
        if defect_id != 0:
            _fail(failures, check="R-inverse", n=n, defect=defect_id)
        rep = check_order_preservation(S, n_pairs=4, t_max=20,
                                       seed=int(rng.integers(2 ** 31)))
        checks += 1
        min_entry = min(min_entry, rep.min_entry)
        pair_min = min(pair_min, rep.pair_min)
        if not math.isnan(rep.identity_defect):
            identity_defect = max(identity_defect, rep.identity_defect)
        if rep.min_entry < -1e-12:
            _fail(failures, check="conjugation-nonnegative",
                  variant=model.variant, graph=_graph_payload(g),
                  beta=model.beta, delta=model.delta,
                  contact=model.contact, min_entry=rep.min_entry)
        if rep.pair_min < -1e-12:
            _fail(failures, check="ordered-pair", variant=model.variant,
                  graph=_graph_payload(g), pair_min=rep.pair_min)
        if not math.isnan(rep.identity_defect) and rep.identity_defect > 1e-12:
            _fail(failures, check="transpose-identity", variant=model.variant,
                  graph=_graph_payload(g), defect=rep.identity_defect)
    return SuiteResult("ordering", not failures, checks, failures, {
        "min_conjugated_entry": min_entry,
        "min_ordered_pair_value": pair_min,
        "max_transpose_identity_defect": identity_defect,
    })


def _suite_u_bound(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    worst = math.inf
    checks = 0
    for _ in range(trials):
        g = _random_graph(rng, min(n_max, 6))
        model = ModelSpec("sis-nia", beta=float(rng.uniform(0.05, 0.95)),
                          delta=float(rng.uniform(0.05, 0.95)))
        S = build_transition_matrix(model, g)
        for _ in range(2):
            r = rng.uniform(0.0, 1.0, g.n)
            slack = check_u_bound(S, model, g, r)
            checks += 1
            worst = min(worst, slack)
            if slack < -1e-12:
                _fail(failures, check="u-bound", graph=_graph_payload(g),
                      beta=model.beta, delta=model.delta, r=r, slack=slack)
    return SuiteResult("u-bound", not failures, checks, failures,
                       {"worst_slack": worst})


def _lp_models(rng: np.random.Generator, n: int) -> list[ModelSpec]:
    beta = float(rng.uniform(0.05, 0.95))
    delta = float(rng.uniform(0.05, 0.95))
    gamma = float(rng.uniform(0.05, 0.95))
    theta = float(rng.uniform(0.05, 0.9))
    return [
        ModelSpec("sis-nia", beta=beta, delta=delta),
        ModelSpec("sis-ia", beta=beta, delta=delta),
        ModelSpec("sis-general", contact=_random_contact(rng, n)),
        ModelSpec("sirs", beta=beta, delta=delta, gamma=gamma),
        ModelSpec("siv-id", beta=beta, delta=delta, gamma=gamma, theta=theta),
        ModelSpec("siv-vd", beta=beta, delta=delta, gamma=gamma, theta=theta),
    ]


def _suite_lp(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    checks = 0
    max_gap = -math.inf
    worst_eq = 0.0
    rounds = max(1, trials // 12)
    variants = ("sis-nia", "sis-ia", "sis-general", "sirs", "siv-id",
                "siv-vd")
    for _ in range(rounds):
        for variant in variants:
            beta = float(rng.uniform(0.05, 0.95))
            delta = float(rng.uniform(0.05, 0.95))
            gamma = float(rng.uniform(0.05, 0.95))
            theta = float(rng.uniform(0.05, 0.9))
            if variant == "sis-general":
                n = int(rng.integers(2, min(n_max, 4) + 1))
                model = ModelSpec(variant, contact=_random_contact(rng, n))
                g = generate("complete", n=n)
            elif variant in ("sis-nia", "sis-ia"):
                model = ModelSpec(variant, beta=beta, delta=delta)
                g = _random_graph(rng, min(n_max, 4))
                n = g.n
            else:
                kwargs = {"beta": beta, "delta": delta, "gamma": gamma}
                if variant != "sirs":
                    kwargs["theta"] = theta
                model = ModelSpec(variant, **kwargs)
                g = _random_graph(rng, 3)
                n = g.n
            i = int(rng.integers(n))
            # Small-marginal family: total mass below 1 so the documented
            # attainment distribution is feasible and the bound is tight.
            small = rng.uniform(0.0, 1.0, n if model.k == 2 else 2 * n)
            small *= rng.uniform(0.2, 0.95) / max(small.sum(), 1e-12)
            if model.k == 2:
                p_small = MarginalArgs(small, None)
                p_gen = MarginalArgs(rng.uniform(0.0, 1.0, n), None)
            else:
                p_small = MarginalArgs(small[:n], small[n:])
                pi_g = rng.uniform(0.0, 1.0, n)
                pr_g = rng.uniform(0.0, 1.0, n) * (1.0 - pi_g)
                p_gen = MarginalArgs(pi_g, pr_g)
            for p, expect_eq in ((p_small, True), (p_gen, False)):
                rep = lp_marginal_max(model, g, i, p.as_marginals())
                cf = closed_form_marginal_bound(model, g, i,
                                                p.as_marginals())
                checks += 1
                gap = rep.lp_max - cf
                max_gap = max(max_gap, gap)
                if gap > 1e-9:
                    _fail(failures, check="lp-bound", variant=model.variant,
                          graph=_graph_payload(g), node=i, lp=rep.lp_max,
                          closed_form=cf, p_i=p.p_i, p_r=p.p_r)
                if expect_eq:
                    worst_eq = max(worst_eq, abs(gap))
                    if abs(gap) > 1e-6:
                        _fail(failures, check="lp-attainment",
                              variant=model.variant, graph=_graph_payload(g),
                              node=i, gap=gap, p_i=p.p_i, p_r=p.p_r)
    return SuiteResult("lp", not failures, checks, failures, {
        "max_gap_over_bound": max_gap,
        "worst_attainment_defect": worst_eq,
    })


@dataclass
class MarginalArgs:
    p_i: np.ndarray
    p_r: np.ndarray | None

    def as_marginals(self):
        from .exact_chain import MarginalVector
        return MarginalVector(np.asarray(self.p_i, dtype=float),
                              None if self.p_r is None
                              else np.asarray(self.p_r, dtype=float))


def _suite_non_absorption(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    worst = math.inf
    checks = 0
    for _ in range(trials):
        g = _random_graph(rng, min(n_max, 6))
        model = ModelSpec("sis-nia", beta=float(rng.uniform(0.05, 0.95)),
                          delta=float(rng.uniform(0.05, 0.95)))
        X0 = int(rng.integers(1, 2 ** g.n))
        t = int(rng.integers(0, 51))
        rep = non_absorption_check(model, g, X0, t)
        checks += 1
        worst = min(worst, rep.slack)
        if rep.slack < -1e-10:
            _fail(failures, check="non-absorption", graph=_graph_payload(g),
                  beta=model.beta, delta=model.delta, X0=X0, t=t,
                  exact=rep.exact, bound=rep.bound)
    return SuiteResult("non-absorption", not failures, checks, failures,
                       {"worst_slack": worst})


def _interior_point(rng: np.random.Generator, n: int, k: int) -> MeanFieldPoint:
    pi = rng.uniform(0.05, 0.9, n)
    if k == 2:
        return MeanFieldPoint(pi)
    pr = rng.uniform(0.05, 1.0, n) * (0.95 - pi)
    return MeanFieldPoint(pi, pr)


def _all_models(rng: np.random.Generator, n: int) -> list[ModelSpec]:
    return _lp_models(rng, n)


def _suite_linear(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    worst = math.inf
    checks = 0
    rounds = max(1, trials // 6)
    for _ in range(rounds):
        g = _random_graph(rng, n_max)
        for model in _all_models(rng, g.n):
            x = _interior_point(rng, g.n, model.k)
            slack = linear_bound_check(model, g, x)
            checks += 1
            worst = min(worst, slack)
            if slack < -1e-10:
                _fail(failures, check="linear-domination",
                      variant=model.variant, graph=_graph_payload(g),
                      slack=slack, p_i=x.p_i,
                      p_r=x.p_r if x.p_r is not None else None)
    return SuiteResult("linear", not failures, checks, failures,
                       {"worst_slack": worst})


def _suite_jacobian(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    worst = 0.0
    checks = 0
    per_variant = max(1, trials // 6)
    for variant in ("sis-nia", "sis-ia", "sis-general", "sirs", "siv-id",
                    "siv-vd"):
        for _ in range(per_variant):
            g = _random_graph(rng, n_max)
            if variant == "sis-general":
                model = ModelSpec(variant, contact=_random_contact(rng, g.n))
            elif variant in ("sis-nia", "sis-ia"):
                model = ModelSpec(variant,
                                  beta=float(rng.uniform(0.05, 0.95)),
                                  delta=float(rng.uniform(0.05, 0.95)))
            elif variant == "sirs":
                model = ModelSpec(variant,
                                  beta=float(rng.uniform(0.05, 0.95)),
                                  delta=float(rng.uniform(0.05, 0.95)),
                                  gamma=float(rng.uniform(0.05, 0.95)))
            else:
                model = ModelSpec(variant,
                                  beta=float(rng.uniform(0.05, 0.95)),
                                  delta=float(rng.uniform(0.05, 0.95)),
                                  gamma=float(rng.uniform(0.05, 0.95)),
                                  theta=float(rng.uniform(0.05, 0.9)))
            x = _interior_point(rng, g.n, model.k)
            J = mf_jacobian(model, g, x)
            J_fd = fd_jacobian(model, g, x)
            err = float(np.abs(J - J_fd).max())
            checks += 1
            worst = max(worst, err)
            if err > 1e-6:
                _fail(failures, check="jacobian-fd", variant=variant,
                      graph=_graph_payload(g), error=err, p_i=x.p_i,
                      p_r=x.p_r if x.p_r is not None else None)
    return SuiteResult("jacobian", not failures, checks, failures,
                       {"max_fd_error": worst})


def _suite_stability_er(n_max: int, trials: int, seed: int) -> SuiteResult:
    """Endemic stability rate on G(n, 2 ln n / n), non-decreasing in n."""
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    sizes = (200, 400, 800)
    per_size = max(10, trials)
    rates = []
    checks = 0
    for n in sizes:
        g = generate("er", n=n, p=2.0 * math.log(n) / n,
                     seed=int(rng.integers(2 ** 31)))
        lam = spectral_radius(g).lambda_max
        stable = 0
        for _ in range(per_size):
            delta = float(rng.uniform(0.2, 0.95))
            ratio = float(rng.uniform(1.05, 3.0))
            beta = min(1.0, ratio * delta / lam)
            model = ModelSpec("sis-ia", beta=beta, delta=delta)
            rep = find_fixed_point(model, g, tol=1e-10,
                                   compute_spectrum=False)
            checks += 1
            if rep.classification != "endemic":
                _fail(failures, check="endemic-classification", n=n,
                      beta=beta, delta=delta,
                      classification=rep.classification)
                continue
            J = mf_jacobian(model, g, rep.point)
            rho = _spectral_radius_dense(J)
            if rho < 1.0:
                stable += 1
            else:
                # An unstable endemic point is counted against the rate but
                # is not itself a failure; the suite asserts the rate.
                pass
        rates.append(stable / per_size)
    for i, rate in enumerate(rates):
        if rate < 0.95:
            _fail(failures, check="stability-rate", n=sizes[i], rate=rate)
    for i in range(1, len(rates)):
        if rates[i] < rates[i - 1] - 1e-12:
            _fail(failures, check="rate-monotone", sizes=list(sizes),
                  rates=rates)
    return SuiteResult("stability-er", not failures, checks, failures,
                       {"sizes": list(sizes), "stability_rates": rates})


def _spectral_radius_dense(J: np.ndarray) -> float:
    """Largest |eigenvalue| of a dense matrix, ARPACK first for speed."""
    n = J.shape[0]
    if n >= 300:
        try:
            from scipy.sparse.linalg import eigs
            vals = eigs(J, k=6, which="LM", return_eigenvectors=False,
                        maxiter=5000, tol=1e-9)
            return float(np.abs(vals).max())
        except Exception:
            pass
    return float(np.abs(np.linalg.eigvals(J)).max())


def _mixing_roster() -> list[tuple[ModelSpec, Graph]]:
    """Below-threshold instances for every variant, k^n <= 3^8."""
    p3 = generate("path", n=3)
    p7 = generate("path", n=7)
    p10 = generate("path", n=10)
    s4 = generate("star", n=4)
    roster: list[tuple[ModelSpec, Graph]] = [
        (ModelSpec("sis-nia", beta=0.1, delta=0.9), p3),
        (ModelSpec("sis-nia", beta=0.05, delta=0.9), p10),
        (ModelSpec("sis-nia", beta=0.05, delta=0.7), s4),
        (ModelSpec("sis-ia", beta=0.1, delta=0.9), p3),
        (ModelSpec("sis-ia", beta=0.05, delta=0.9), p10),
        (ModelSpec("sis-general",
                   contact=contact_from_rates(p3, 0.1, 0.9)), p3),
        (ModelSpec("sis-general",
                   contact=contact_from_rates(s4, 0.08, 0.8)), s4),
        (ModelSpec("sirs", beta=0.05, delta=0.3, gamma=0.6), p3),
        (ModelSpec("sirs", beta=0.1, delta=0.4, gamma=0.7), p3),
        (ModelSpec("sirs", beta=0.05, delta=0.25, gamma=0.8), p3),
        (ModelSpec("sirs", beta=0.1, delta=0.5, gamma=0.9), p3),
        (ModelSpec("sirs", beta=0.05, delta=0.6, gamma=0.9), p7),
        # state space exactly at the 3^8 cap
        (ModelSpec("sirs", beta=0.05, delta=0.6, gamma=0.9),
         generate("path", n=8)),
        (ModelSpec("siv-id", beta=0.1, delta=0.5, gamma=0.5, theta=0.5), p3),
        (ModelSpec("siv-id", beta=0.05, delta=0.4, gamma=0.3, theta=0.6), p3),
        (ModelSpec("siv-id", beta=0.1, delta=0.6, gamma=0.5, theta=0.5),
         generate("path", n=5)),
        (ModelSpec("siv-vd", beta=0.1, delta=0.5, gamma=0.5, theta=0.5), p3),
        (ModelSpec("siv-vd", beta=0.08, delta=0.5, gamma=0.4, theta=0.4),
         generate("path", n=5)),
    ]
    return roster


def _suite_mixing(n_max: int, trials: int, seed: int) -> SuiteResult:
    failures: list[dict] = []
    checks = 0
    rows = []
    for model, g in _mixing_roster():
        ratio = threshold_ratio(model, g)
        bound = mixing_time_bound(model, g, 0.25)
        if ratio >= 1.0 or not math.isfinite(bound):
            _fail(failures, check="roster-instance", variant=model.variant,
                  graph=_graph_payload(g), ratio=ratio, bound=bound)
            continue
        S = build_transition_matrix(model, g)
        pi = stationary(model, g)
        rep = mixing_time_exact(S, pi, 0.25)
        checks += 1
        rows.append({"variant": model.variant, "n": g.n,
                     "t_mix": rep.t_mix, "bound": bound})
        if rep.censored or rep.t_mix is None or rep.t_mix > math.ceil(bound):
            _fail(failures, check="mixing-bound", variant=model.variant,
                  graph=_graph_payload(g), t_mix=rep.t_mix, bound=bound,
                  model=model.describe())
    return SuiteResult("mixing", not failures, checks, failures,
                       {"instances": rows})


def _suite_stationary(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    checks = 0
    worst = 0.0
    for variant in ("siv-id", "siv-vd"):
        for n in (2, 3, 4):
            for _ in range(max(1, trials // 12)):
                g = _random_graph(rng, n, n_min=n)
                model = ModelSpec(variant,
                                  beta=float(rng.uniform(0.05, 0.95)),
                                  delta=float(rng.uniform(0.05, 0.95)),
                                  gamma=float(rng.uniform(0.05, 0.95)),
                                  theta=float(rng.uniform(0.05, 0.9)))
                pi = stationary(model, g)
                S = build_transition_matrix(model, g)
                defect = float(np.abs(pi.entries @ S.entries
                                      - pi.entries).max())
                checks += 1
                worst = max(worst, defect)
                if defect > 1e-10:
                    _fail(failures, check="stationary", variant=variant,
                          graph=_graph_payload(g), defect=defect,
                          model=model.describe())
    return SuiteResult("stationary", not failures, checks, failures,
                       {"max_defect": worst})


def _suite_fixed_point(n_max: int, trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures: list[dict] = []
    checks = 0
    worst = 0.0
    for _ in range(max(1, trials // 3)):
        g = _random_graph(rng, max(4, n_max), weighted_prob=0.0)
        lam = spectral_radius(g).lambda_max
        for variant in ("sirs", "siv-id", "siv-vd"):
            delta = float(rng.uniform(0.2, 0.8))
            gamma = float(rng.uniform(0.2, 0.9))
            theta = float(rng.uniform(0.05, 0.6))
            ratio_target = float(rng.uniform(1.3, 3.0))
            eff = 1.0
            if variant == "siv-id":
                eff = gamma / (gamma + theta)
            elif variant == "siv-vd":
                eff = (1.0 - theta) * gamma / (gamma + theta)
            beta = min(1.0, ratio_target * delta / (eff * lam))
            kwargs = {"beta": beta, "delta": delta, "gamma": gamma}
            if variant != "sirs":
                kwargs["theta"] = theta
            model = ModelSpec(variant, **kwargs)
            if threshold_ratio(model, g) <= 1.0:
                continue
            rep = find_fixed_point(model, g, tol=1e-12,
                                   compute_spectrum=False)
            checks += 1
            if rep.classification != "endemic":
                _fail(failures, check="endemic-classification",
                      variant=variant, graph=_graph_payload(g),
                      model=model.describe(),
                      classification=rep.classification)
                continue
            if rep.relation_defect is None or rep.relation_defect > 1e-8:
                _fail(failures, check="fixed-point-relation", variant=variant,
                      graph=_graph_payload(g), model=model.describe(),
                      defect=rep.relation_defect)
            else:
                worst = max(worst, rep.relation_defect)
    return SuiteResult("fixed-point", not failures, checks, failures,
                       {"max_relation_defect": worst})


_SUITE_FUNCS = {
    "ordering": _suite_ordering,
    "u-bound": _suite_u_bound,
    "lp": _suite_lp,
    "non-absorption": _suite_non_absorption,
    "linear": _suite_linear,
    "jacobian": _suite_jacobian,
    "stability-er": _suite_stability_er,
    "mixing": _suite_mixing,
    "stationary": _suite_stationary,
    "fixed-point": _suite_fixed_point,
}


def run_suite(name: str, n_max: int = 5, trials: int = 50,
              seed: int = 0) -> SuiteResult:
    if name not in _SUITE_FUNCS:
        raise VerifyError(
            f"unknown suite {name!r}; valid: {', '.join(SUITES)} or 'all'"
        )
    return _SUITE_FUNCS[name](n_max, trials, seed)


def run_suites(names, n_max: int = 5, trials: int = 50,
               seed: int = 0) -> list[SuiteResult]:
    if isinstance(names, str):
        names = [names]
    expanded: list[str] = []
    for name in names:
        if name == "all":
            expanded.extend(SUITES)
        else:
            expanded.append(name)
    return [run_suite(name, n_max=n_max, trials=trials, seed=seed)
            for name in expanded]
