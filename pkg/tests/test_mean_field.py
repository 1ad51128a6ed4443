"""Mean-field maps, Jacobians, fixed points, and certificates."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epinet import (
    CertificateError,
    DistVector,
    Graph,
    LinearModel,
    MeanFieldError,
    MeanFieldPoint,
    ModelSpec,
    build_transition_matrix,
    classify_stability,
    contact_from_rates,
    fd_jacobian,
    find_fixed_point,
    generate,
    linear_bound_check,
    marginals,
    mf_iterate,
    mf_jacobian,
    mf_linear_model,
    mf_step,
    propagate,
    siv_base_point,
    spectral_radius,
    states_table,
    threshold_ratio,
)

from conftest import ALL_VARIANTS, random_connected_graph, random_model


def product_dist(point: MeanFieldPoint) -> DistVector:
    """Joint product measure with the given per-node marginals."""
    n = point.n
    k = point.k
    D = states_table(n, k)
    if k == 2:
        node_probs = np.stack([1.0 - point.p_i, point.p_i])
    else:
        p_s = 1.0 - point.p_i - point.p_r
        node_probs = np.stack([p_s, point.p_i, point.p_r])
    probs = np.ones(k ** n)
    for i in range(n):
        probs *= node_probs[D[:, i], i]
    return DistVector(probs)


def random_point(rng, variant: str, n: int) -> MeanFieldPoint:
    if variant in ("sirs", "siv-id", "siv-vd"):
        raw = rng.random((2, n))
        raw /= raw.sum(axis=0) * rng.uniform(1.2, 3.0)
        return MeanFieldPoint(raw[0], raw[1])
    return MeanFieldPoint(rng.random(n))


# ---------------------------------------------------------------------------
# MeanFieldPoint
# ---------------------------------------------------------------------------

class TestPoint:
    def test_validation(self):
        with pytest.raises(MeanFieldError):
            MeanFieldPoint(np.array([0.5, 1.2]))
        with pytest.raises(MeanFieldError):
            MeanFieldPoint(np.array([0.7, 0.1]), np.array([0.5, 0.2]))

    def test_fp_slop_clipped(self):
        pt = MeanFieldPoint(np.array([1.0 + 5e-10, -5e-10]))
        assert pt.p_i[0] == 1.0
        assert pt.p_i[1] == 0.0

    def test_concat_roundtrip(self):
        pt = MeanFieldPoint(np.array([0.2, 0.3]), np.array([0.1, 0.4]))
        v = pt.concat()
        assert v.tolist() == [0.1, 0.4, 0.2, 0.3]  # recovered block first
        back = MeanFieldPoint.from_concat(v, 3)
        assert np.array_equal(back.p_i, pt.p_i)
        assert np.array_equal(back.p_r, pt.p_r)
        assert pt.k == 3 and pt.n == 2

    def test_k2_concat(self):
        pt = MeanFieldPoint(np.array([0.2, 0.3]))
        assert pt.concat().tolist() == [0.2, 0.3]
        assert pt.k == 2


# ---------------------------------------------------------------------------
# One-step map
# ---------------------------------------------------------------------------

class TestStep:
    def test_sis_nia_hand_value(self):
        g = generate("path", n=2)
        m = ModelSpec("sis-nia", beta=0.8, delta=0.4)
        out = mf_step(m, g, MeanFieldPoint(np.array([0.5, 0.5])))
        # 1 - (1 - 0.8*0.5) * (1 - 0.6*0.5) = 1 - 0.6*0.7
        assert out.p_i[0] == pytest.approx(0.58)

    def test_sis_ia_hand_value(self):
        g = generate("path", n=2)
        m = ModelSpec("sis-ia", beta=0.8, delta=0.4)
        out = mf_step(m, g, MeanFieldPoint(np.array([0.5, 0.5])))
        # 0.6*0.5 + 0.5*(1 - 0.6)
        assert out.p_i[0] == pytest.approx(0.5)

    def test_sirs_hand_value(self):
        g = generate("path", n=2)
        m = ModelSpec("sirs", beta=0.5, delta=0.3, gamma=0.6)
        pt = MeanFieldPoint(np.array([0.4, 0.2]), np.array([0.1, 0.3]))
        out = mf_step(m, g, pt)
        s0 = 1.0 - 0.4 - 0.1
        pi0 = 0.7 * 0.4 + (1.0 - (1.0 - 0.5 * 0.2)) * s0
        pr0 = 0.4 * 0.1 + 0.3 * 0.4
        assert out.p_i[0] == pytest.approx(pi0)
        assert out.p_r[0] == pytest.approx(pr0)

    def test_product_measure_one_step_identity(self, rng):
        """Exact chain marginals after one step from a product measure equal
        the mean-field map output, for every variant. The two computations
        share no code path."""
        for variant in ALL_VARIANTS:
            g = random_connected_graph(rng, 4, weighted_prob=0.4)
            m = random_model(rng, variant, n=g.n)
            pt = random_point(rng, variant, g.n)
            mu = product_dist(pt)
            S = build_transition_matrix(m, g)
            exact = marginals(propagate(mu, S, 1), m)
            mf = mf_step(m, g, pt)
            assert np.abs(exact.p_i - mf.p_i).max() < 1e-12, variant
            if m.k == 3:
                assert np.abs(exact.p_r - mf.p_r).max() < 1e-12, variant

    def test_general_matches_nia(self, rng):
        g = random_connected_graph(rng, 6, weighted_prob=0.5)
        beta, delta = 0.35, 0.65
        m1 = ModelSpec("sis-nia", beta=beta, delta=delta)
        m2 = ModelSpec("sis-general",
                       contact=contact_from_rates(g, beta, delta))
        x = MeanFieldPoint(rng.random(g.n))
        out1 = mf_step(m1, g, x)
        out2 = mf_step(m2, g, x)
        assert np.abs(out1.p_i - out2.p_i).max() < 1e-12

    def test_siv_theta_zero_is_sirs(self, rng):
        g = random_connected_graph(rng, 6)
        pt = random_point(rng, "sirs", g.n)
        m_sirs = ModelSpec("sirs", beta=0.4, delta=0.3, gamma=0.5)
        for variant in ("siv-id", "siv-vd"):
            m_siv = ModelSpec(variant, beta=0.4, delta=0.3, gamma=0.5,
                              theta=0.0)
            a = mf_step(m_sirs, g, pt)
            b = mf_step(m_siv, g, pt)
            assert np.array_equal(a.p_i, b.p_i)
            assert np.array_equal(a.p_r, b.p_r)

    def test_siv_base_point_is_fixed(self, rng):
        g = random_connected_graph(rng, 5)
        for variant in ("siv-id", "siv-vd"):
            m = random_model(rng, variant, n=g.n)
            base = siv_base_point(m, g.n)
            out = mf_step(m, g, base)
            assert np.abs(out.p_i - base.p_i).max() == 0.0
            assert np.abs(out.p_r - base.p_r).max() < 1e-15

    def test_requires_matching_k(self, path3):
        m = ModelSpec("sirs", beta=0.4, delta=0.3, gamma=0.5)
        with pytest.raises(MeanFieldError):
            mf_step(m, path3, MeanFieldPoint(np.full(3, 0.5)))

    @given(st.integers(0, 10 ** 6), st.sampled_from(ALL_VARIANTS))
    @settings(max_examples=40, deadline=None)
    def test_stays_in_box(self, seed, variant):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(rng, 6, weighted_prob=0.3)
        m = random_model(rng, variant, n=g.n)
        pt = random_point(rng, variant, g.n)
        out = mf_step(m, g, pt)
        assert np.all(out.p_i >= 0.0) and np.all(out.p_i <= 1.0)
        if m.k == 3:
            assert np.all(out.p_r >= 0.0)
            assert np.all(out.p_i + out.p_r <= 1.0 + 1e-12)

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_monotone_sis_nia(self, seed):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(rng, 6)
        m = random_model(rng, "sis-nia", n=g.n)
        x = rng.random(g.n)
        y = x + rng.random(g.n) * (1.0 - x)
        fx = mf_step(m, g, MeanFieldPoint(x)).p_i
        fy = mf_step(m, g, MeanFieldPoint(y)).p_i
        assert np.all(fx <= fy + 1e-12)


# ---------------------------------------------------------------------------
# Linearization
# ---------------------------------------------------------------------------

class TestLinearModel:
    def test_k2_matrix(self):
        g = generate("star", n=4)
        m = ModelSpec("sis-nia", beta=0.3, delta=0.4)
        lm = mf_linear_model(m, g)
        expected = 0.6 * np.eye(4) + 0.3 * g.adjacency()
        assert np.allclose(lm.matrix, expected, atol=1e-15)
        assert np.all(lm.base_point.p_i == 0.0)

    def test_general_matrix_is_contact(self, rng):
        g = random_connected_graph(rng, 4)
        M = contact_from_rates(g, 0.2, 0.7)
        m = ModelSpec("sis-general", contact=M)
        lm = mf_linear_model(m, g)
        assert np.array_equal(lm.matrix, M)

    def test_sirs_blocks(self):
        g = generate("path", n=3)
        m = ModelSpec("sirs", beta=0.2, delta=0.5, gamma=0.3)
        lm = mf_linear_model(m, g)
        n = 3
        A = g.adjacency()
        assert np.allclose(lm.matrix[:n, :n], 0.7 * np.eye(n))
        assert np.allclose(lm.matrix[:n, n:], 0.5 * np.eye(n))
        assert np.allclose(lm.matrix[n:, :n], 0.0)
        assert np.allclose(lm.matrix[n:, n:], 0.5 * np.eye(n) + 0.2 * A)

    def test_jacobian_at_base_equals_linear_k2_sirs(self, rng):
        for variant in ("sis-nia", "sis-ia", "sis-general", "sirs"):
            g = random_connected_graph(rng, 5)
            m = random_model(rng, variant, n=g.n)
            lm = mf_linear_model(m, g)
            J = mf_jacobian(m, g, lm.base_point)
            assert np.abs(J - lm.matrix).max() < 1e-12, variant

    def test_siv_id_printed_equals_jacobian(self, rng):
        g = random_connected_graph(rng, 5)
        m = random_model(rng, "siv-id", n=g.n)
        lm = mf_linear_model(m, g)
        J = mf_jacobian(m, g, lm.base_point)
        assert np.abs(J - lm.matrix).max() < 1e-12

    def test_siv_vd_printed_top_right_discrepancy(self, rng):
        """The conventional printed linearization for vaccination-dominant
        dynamics carries an adjacency term in its upper-right block that the
        true derivative does not have; the spectra still agree because both
        matrices are block-triangular with identical diagonal blocks."""
        g = random_connected_graph(rng, 5)
        m = random_model(rng, "siv-vd", n=g.n)
        n = g.n
        lm = mf_linear_model(m, g)
        J = mf_jacobian(m, g, lm.base_point)
        ps = m.gamma / (m.gamma + m.theta)
        expected_gap = m.theta * ps * m.beta * g.adjacency()
        gap = J[:n, n:] - lm.matrix[:n, n:]
        assert np.abs(gap - expected_gap).max() < 1e-12
        # identical everywhere else
        assert np.abs(J[:n, :n] - lm.matrix[:n, :n]).max() < 1e-12
        assert np.abs(J[n:, :] - lm.matrix[n:, :]).max() < 1e-12
        ev_a = np.sort_complex(np.linalg.eigvals(lm.matrix))
        ev_b = np.sort_complex(np.linalg.eigvals(J))
        assert np.abs(ev_a - ev_b).max() < 1e-9

    def test_linear_spectrum_matches_threshold(self, rng):
        """Spectral radius of the infected block is ratio * delta for the
        rate-based variants (the threshold statement in matrix form)."""
        g = random_connected_graph(rng, 6)
        lam = spectral_radius(g).lambda_max
        m = ModelSpec("siv-vd", beta=0.3, delta=0.6, gamma=0.4, theta=0.2)
        lm = mf_linear_model(m, g)
        n = g.n
        block = lm.matrix[n:, n:]
        rho = np.abs(np.linalg.eigvals(block)).max()
        eff = (1.0 - 0.2) * (0.4 / 0.6)  # (1-theta) * stationary S fraction
        assert rho == pytest.approx(0.4 + 0.3 * eff * lam, abs=1e-9)
        # the same quantity expressed through the scalar threshold ratio:
        # rho = (1 - delta) + ratio * delta
        ratio = threshold_ratio(m, g)
        assert rho == pytest.approx(0.4 + ratio * 0.6, abs=1e-9)


class TestJacobian:
    def test_matches_finite_differences(self, rng):
        for variant in ALL_VARIANTS:
            for _ in range(3):
                g = random_connected_graph(rng, 5, weighted_prob=0.3)
                m = random_model(rng, variant, n=g.n)
                pt = random_point(rng, variant, g.n)
                # keep the FD stencil inside the box
                pt = MeanFieldPoint(
                    0.1 + 0.6 * pt.p_i,
                    None if pt.p_r is None else 0.05 + 0.2 * pt.p_r,
                )
                J = mf_jacobian(m, g, pt)
                J_fd = fd_jacobian(m, g, pt)
                assert np.abs(J - J_fd).max() < 1e-6, variant

    def test_zero_escape_factor_leave_one_out(self):
        """A saturated edge (beta w = 1 onto an infected neighbor) zeroes one
        escape factor; the leave-one-out derivative must stay finite and
        match a brute-force product."""
        g = generate("star", n=4)
        m = ModelSpec("sis-nia", beta=1.0, delta=0.5)
        x = np.array([0.0, 1.0, 0.5, 0.25])
        J = mf_jacobian(m, g, MeanFieldPoint(x))
        assert np.all(np.isfinite(J))
        # dPhi_0/dx_2: (1 - bx_1)(1 - bx_3) with the x_1 factor = 0
        assert J[0, 2] == pytest.approx(0.0, abs=1e-15)
        # dPhi_0/dx_1: (1 - bx_2)(1 - bx_3) = 0.5 * 0.75
        assert J[0, 1] == pytest.approx(0.375 * (1.0 - 0.5 * 0.0), abs=1e-12)


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------

class TestFixedPoint:
    def test_endemic_closed_form_k2(self):
        g = generate("complete", n=2)
        m = ModelSpec("sis-nia", beta=0.8, delta=0.4)
        rep = find_fixed_point(m, g)
        assert rep.classification == "endemic"
        assert np.allclose(rep.point.p_i, 0.4 / 0.48, atol=1e-9)
        assert rep.residual < 1e-10

    def test_disease_free_below_threshold(self, rng):
        g = random_connected_graph(rng, 8)
        lam = spectral_radius(g).lambda_max
        m = ModelSpec("sis-nia", beta=round(0.5 * 0.8 / lam, 6), delta=0.8)
        assert threshold_ratio(m, g) < 1.0
        rep = find_fixed_point(m, g)
        assert rep.classification == "disease-free"
        assert np.abs(rep.point.p_i).max() < 1e-8

    def test_monotone_variants_use_raw_map(self, rng):
        g = random_connected_graph(rng, 6)
        m = random_model(rng, "sis-general", n=g.n)
        rep = find_fixed_point(m, g)
        assert rep.classification in ("disease-free", "endemic")

    def test_multistart_agreement_above_threshold(self, rng):
        g = random_connected_graph(rng, 7)
        lam = spectral_radius(g).lambda_max
        m = ModelSpec("sis-nia", beta=min(0.95, round(1.6 * 0.5 / lam, 6)),
                      delta=0.5)
        assert threshold_ratio(m, g) > 1.0
        ref = find_fixed_point(m, g, tol=1e-12)
        assert ref.classification == "endemic"
        for _ in range(5):
            x0 = MeanFieldPoint(rng.uniform(0.05, 1.0, g.n))
            rep = find_fixed_point(m, g, tol=1e-12, x0=x0)
            assert np.abs(rep.point.p_i - ref.point.p_i).max() < 1e-7

    def test_raw_iteration_cycles_damped_converges(self, star3):
        """Recovery-independent dynamics on the 3-star at high rates: the
        raw map falls into a period-2 cycle, damping restores convergence to
        the endemic point."""
        m = ModelSpec("sis-ia", beta=0.9, delta=0.9)
        raw = find_fixed_point(m, star3, damping=1.0)
        assert raw.classification == "cycle(2)"
        damped = find_fixed_point(m, star3)
        assert damped.classification == "endemic"
        assert np.allclose(damped.point.p_i,
                           [2.0 / 7.0, 2.0 / 9.0, 2.0 / 9.0], atol=1e-8)

    def test_relation_defect_endemic_k3(self, rng):
        specs = [
            ("sirs", dict(beta=0.6, delta=0.3, gamma=0.4)),
            ("siv-id", dict(beta=0.7, delta=0.2, gamma=0.6, theta=0.05)),
            ("siv-vd", dict(beta=0.8, delta=0.2, gamma=0.6, theta=0.05)),
        ]
        g = random_connected_graph(rng, 7)
        for variant, params in specs:
            m = ModelSpec(variant, **params)
            assert threshold_ratio(m, g) > 1.0
            rep = find_fixed_point(m, g, tol=1e-12)
            assert rep.classification == "endemic", variant
            assert rep.relation_defect is not None
            assert rep.relation_defect <= 1e-8, variant

    def test_iterate_trajectory(self, path3):
        m = ModelSpec("sis-nia", beta=0.3, delta=0.7)
        x0 = MeanFieldPoint(np.ones(3))
        traj = mf_iterate(m, path3, x0, 5)
        assert len(traj) == 6
        step1 = mf_step(m, path3, x0)
        assert np.array_equal(traj[1].p_i, step1.p_i)

    def test_tol_validation(self, path3):
        m = ModelSpec("sis-nia", beta=0.3, delta=0.7)
        with pytest.raises(MeanFieldError):
            find_fixed_point(m, path3, tol=0.0)


# ---------------------------------------------------------------------------
# Stability and certificates
# ---------------------------------------------------------------------------

class TestStability:
    def test_disease_free_stable_below_threshold(self, rng):
        g = random_connected_graph(rng, 6)
        lam = spectral_radius(g).lambda_max
        m = ModelSpec("sis-nia", beta=round(0.7 * 0.6 / lam, 6), delta=0.6)
        rep = find_fixed_point(m, g)
        st_rep = classify_stability(m, g, rep.point)
        assert st_rep.stable
        assert st_rep.spectral_radius < 1.0

    def test_star3_endemic_unstable(self, star3):
        m = ModelSpec("sis-ia", beta=0.9, delta=0.9)
        rep = find_fixed_point(m, star3)
        st_rep = classify_stability(m, star3, rep.point)
        assert not st_rep.stable
        assert st_rep.spectral_radius == pytest.approx(1.0587, abs=1e-3)

    def test_rejects_non_fixed_point(self, path3):
        m = ModelSpec("sis-nia", beta=0.9, delta=0.1)
        with pytest.raises(MeanFieldError, match="not fixed"):
            classify_stability(m, path3, MeanFieldPoint(np.full(3, 0.37)))

    def test_perron_certificate_above_threshold(self, rng):
        g = random_connected_graph(rng, 8)
        lam = spectral_radius(g).lambda_max
        m = ModelSpec("sis-nia", beta=min(0.95, round(1.4 * 0.5 / lam, 6)),
                      delta=0.5)
        v = perron_certificate_checked(m, g)
        assert v is not None
        assert v.min() > 0.0
        A = g.adjacency()
        growth = m.beta * (A @ v) - m.delta * v
        assert growth.min() > 0.0

    def test_perron_none_below_threshold(self, rng):
        g = random_connected_graph(rng, 6)
        lam = spectral_radius(g).lambda_max
        m = ModelSpec("sis-nia", beta=round(0.5 * 0.5 / lam, 6), delta=0.5)
        assert perron_certificate_checked(m, g) is None

    def test_perron_general_variant(self, rng):
        g = random_connected_graph(rng, 5)
        M = contact_from_rates(g, 0.9, 0.1)
        m = ModelSpec("sis-general", contact=M)
        v = perron_certificate_checked(m, g)
        assert v is not None
        assert np.all(M @ v - v > 0.0)

    def test_linear_bound_dominates(self, rng):
        for variant in ALL_VARIANTS:
            g = random_connected_graph(rng, 6, weighted_prob=0.3)
            m = random_model(rng, variant, n=g.n)
            pt = random_point(rng, variant, g.n)
            assert linear_bound_check(m, g, pt) >= -1e-12, variant


def perron_certificate_checked(m, g):
    from epinet import perron_certificate

    return perron_certificate(m, g)
