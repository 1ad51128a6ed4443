"""Monte Carlo sampler: determinism, absorption, exact-chain agreement."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epinet import (
    ChainState,
    DistVector,
    EnsembleReport,
    ModelSpec,
    MonteCarloError,
    SimState,
    TrajectoryRecord,
    build_transition_matrix,
    ensemble_to_csv,
    extinction_time,
    generate,
    marginals,
    mc_ensemble,
    mc_run,
    mc_step,
    parse_ensemble_csv,
    propagate,
)

from conftest import ALL_VARIANTS, random_connected_graph, random_model


class TestSimState:
    def test_digit_validation(self):
        st_bad = np.array([0, 3], dtype=np.int8)
        with pytest.raises(MonteCarloError):
            SimState(st_bad, t=0, rng_seed=0, replicate=0)

    def test_i_count(self):
        s = SimState(np.array([0, 1, 1, 2], dtype=np.int8), t=0, rng_seed=0,
                     replicate=0)
        assert s.i_count == 2


class TestDeterminism:
    def test_same_seed_bitwise_identical(self, rng):
        for variant in ALL_VARIANTS:
            g = random_connected_graph(rng, 12, weighted_prob=0.3)
            m = random_model(rng, variant, n=g.n)
            a = mc_run(m, g, t_max=40, seed=11, replicate=3)
            b = mc_run(m, g, t_max=40, seed=11, replicate=3)
            assert a.rows == b.rows
            assert a.absorbed_at == b.absorbed_at

    def test_different_replicates_decorrelated(self):
        g = generate("er", n=30, p=0.2, seed=4)
        m = ModelSpec("sis-nia", beta=0.3, delta=0.4)
        a = mc_run(m, g, t_max=30, seed=11, replicate=0)
        b = mc_run(m, g, t_max=30, seed=11, replicate=1)
        assert a.rows != b.rows

    def test_thread_count_does_not_change_results(self, monkeypatch):
        g = generate("er", n=25, p=0.25, seed=9)
        m = ModelSpec("sirs", beta=0.4, delta=0.5, gamma=0.3)
        monkeypatch.setenv("EPINET_THREADS", "1")
        seq = mc_ensemble(m, g, t_max=25, n_reps=16, master_seed=5,
                          marginals_at=(5, 25))
        monkeypatch.setenv("EPINET_THREADS", "4")
        par = mc_ensemble(m, g, t_max=25, n_reps=16, master_seed=5,
                          marginals_at=(5, 25))
        assert np.array_equal(seq.i_mean, par.i_mean)
        assert np.array_equal(seq.s_mean, par.s_mean, equal_nan=True)
        assert np.array_equal(seq.r_mean, par.r_mean, equal_nan=True)
        assert seq.absorbed_steps == par.absorbed_steps
        for ts in (5, 25):
            assert np.array_equal(seq.marginals[ts][0], par.marginals[ts][0])
            assert np.array_equal(seq.marginals[ts][1], par.marginals[ts][1])

    def test_single_replicate_matches_mc_run(self):
        g = generate("er", n=15, p=0.3, seed=2)
        m = ModelSpec("sis-ia", beta=0.35, delta=0.45)
        rep = mc_ensemble(m, g, t_max=30, n_reps=1, master_seed=7)
        run = mc_run(m, g, t_max=30, seed=7, replicate=0)
        t_run = np.array([r[2] for r in run.rows])
        # ensemble extends absorbed SIS trajectories with zeros
        assert np.array_equal(rep.i_mean[: len(t_run)], t_run)
        assert np.all(rep.i_mean[len(t_run):] == 0)


class TestAbsorptionEdgeCases:
    def test_beta_zero_never_infects(self):
        g = generate("complete", n=6)
        m = ModelSpec("sis-nia", beta=0.0, delta=1.0)
        rec = mc_run(m, g, t_max=10, seed=0)
        assert rec.rows[0][2] == 6
        assert rec.rows[1][2] == 0
        assert rec.absorbed_at == 1
        assert extinction_time(m, g, seed=0) == 1

    def test_all_susceptible_is_absorbing(self):
        g = generate("complete", n=5)
        m = ModelSpec("sis-nia", beta=0.9, delta=0.1)
        rec = mc_run(m, g, init=(), t_max=20, seed=3)
        assert all(r[2] == 0 for r in rec.rows)
        assert all(r[1] == 5 for r in rec.rows)
        assert rec.absorbed_at == 0

    def test_saturated_edge_never_absorbs(self):
        # both rates 1 on a single edge with recovery annulled by reinfection
        g = generate("complete", n=2)
        m = ModelSpec("sis-nia", beta=1.0, delta=1.0)
        rec = mc_run(m, g, t_max=50, seed=1)
        assert all(r[2] == 2 for r in rec.rows)
        assert rec.absorbed_at is None

    def test_recovery_independent_two_step_extinction(self):
        # with independent recovery at delta = 1 both nodes recover at once
        g = generate("complete", n=2)
        m = ModelSpec("sis-ia", beta=1.0, delta=1.0)
        rec = mc_run(m, g, t_max=50, seed=1)
        assert rec.rows[0][2] == 2
        assert rec.rows[1][2] == 0
        assert rec.absorbed_at == 1

    def test_sis_rows_end_at_absorption_ensemble_extends(self):
        g = generate("path", n=4)
        m = ModelSpec("sis-nia", beta=0.1, delta=0.9)
        rec = mc_run(m, g, t_max=500, seed=5)
        assert rec.absorbed_at is not None
        assert rec.rows[-1][0] == rec.absorbed_at
        rep = mc_ensemble(m, g, t_max=50, n_reps=4, master_seed=5)
        assert len(rep.i_mean) == 51
        assert rep.i_mean[-1] == 0.0
        # SIS susceptible counts extend exactly (all-susceptible freeze)
        assert rep.s_mean[-1] == 4.0

    def test_sirs_post_absorption_counts_unsimulated(self):
        g = generate("path", n=4)
        m = ModelSpec("sirs", beta=0.05, delta=0.9, gamma=0.2)
        rep = mc_ensemble(m, g, t_max=300, n_reps=6, master_seed=8)
        assert rep.extinct_count == 6
        assert np.all(rep.i_mean[-5:] == 0.0)
        # recovered/susceptible splits are NaN once every record has ended
        assert math.isnan(rep.s_mean[-1])
        assert math.isnan(rep.r_mean[-1])

    def test_siv_runs_to_t_max(self):
        g = generate("path", n=4)
        m = ModelSpec("siv-id", beta=0.05, delta=0.9, gamma=0.3, theta=0.4)
        rec = mc_run(m, g, t_max=60, seed=2)
        assert rec.rows[-1][0] == 60  # no early exit: S<->R keeps moving
        assert rec.absorbed_at is not None

    def test_no_reinfection_after_siv_absorption(self):
        g = generate("complete", n=5)
        m = ModelSpec("siv-vd", beta=0.9, delta=0.8, gamma=0.5, theta=0.5)
        rec = mc_run(m, g, t_max=400, seed=6)
        if rec.absorbed_at is not None:
            post = [r for r in rec.rows if r[0] >= rec.absorbed_at]
            assert all(r[2] == 0 for r in post)


class TestInit:
    def test_fraction_init_deterministic(self):
        g = generate("er", n=40, p=0.2, seed=3)
        m = ModelSpec("sis-nia", beta=0.3, delta=0.4)
        a = mc_run(m, g, init=0.25, t_max=5, seed=9)
        b = mc_run(m, g, init=0.25, t_max=5, seed=9)
        assert a.rows == b.rows
        assert 0 < a.rows[0][2] < 40

    def test_explicit_nodes(self):
        g = generate("path", n=6)
        m = ModelSpec("sis-nia", beta=0.5, delta=0.5)
        rec = mc_run(m, g, init=(0, 3), t_max=3, seed=0)
        assert rec.rows[0][2] == 2

    def test_bad_inits(self):
        g = generate("path", n=4)
        m = ModelSpec("sis-nia", beta=0.5, delta=0.5)
        with pytest.raises(MonteCarloError):
            mc_run(m, g, init=(0, 9), t_max=3)
        with pytest.raises(MonteCarloError):
            mc_run(m, g, init=1.7, t_max=3)

    def test_t_max_validation(self):
        g = generate("path", n=4)
        m = ModelSpec("sis-nia", beta=0.5, delta=0.5)
        with pytest.raises(MonteCarloError):
            mc_run(m, g, t_max=0)


class TestStepInvariants:
    @given(st.integers(0, 10 ** 6), st.sampled_from(ALL_VARIANTS))
    @settings(max_examples=30, deadline=None)
    def test_counts_conserved_and_legal_moves(self, seed, variant):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(rng, 10, weighted_prob=0.4)
        m = random_model(rng, variant, n=g.n)
        rec = mc_run(m, g, init=0.5, t_max=15, seed=seed)
        for t, s, i, r in rec.rows:
            assert s + i + r == g.n
            assert r == 0 or m.k == 3

    def test_mc_step_advances_one(self):
        g = generate("path", n=5)
        m = ModelSpec("sirs", beta=0.6, delta=0.2, gamma=0.3)
        s0 = SimState(np.ones(5, dtype=np.int8), t=0, rng_seed=4, replicate=0)
        s1 = mc_step(m, g, s0)
        assert s1.t == 1
        assert s1.states.shape == (5,)
        # infected nodes can only stay infected or move to recovered
        assert np.all(np.isin(s1.states, [1, 2]))

    def test_sis_infected_neighbors_only(self):
        # an isolated-by-distance susceptible node cannot become infected
        g = generate("path", n=5)
        m = ModelSpec("sis-nia", beta=1.0, delta=0.0)
        rec = mc_run(m, g, init=(0,), t_max=1, seed=0)
        # after one step only nodes 0 and 1 can be infected
        assert rec.rows[1][2] <= 2


class TestAgainstExactChain:
    def test_one_step_marginals_within_4_sigma(self, rng):
        reps = 20000
        for variant in ALL_VARIANTS:
            g = random_connected_graph(rng, 4, weighted_prob=0.3)
            m = random_model(rng, variant, n=g.n)
            rep = mc_ensemble(m, g, t_max=1, n_reps=reps, master_seed=13,
                              marginals_at=(1,))
            S = build_transition_matrix(m, g)
            mu = propagate(
                DistVector.point_mass(2 ** g.n - 1 if m.k == 2
                                      else ChainState.from_digits(
                                          [1] * g.n, k=3).code,
                                      S.size),
                S, 1,
            )
            exact = marginals(mu, m)
            got_i = rep.marginals[1][0]
            sig = np.sqrt(exact.p_i * (1.0 - exact.p_i) / reps)
            assert np.all(np.abs(got_i - exact.p_i) <= 4.0 * sig + 1e-12)
            if m.k == 3:
                got_r = rep.marginals[1][1]
                sig_r = np.sqrt(exact.p_r * (1.0 - exact.p_r) / reps)
                assert np.all(np.abs(got_r - exact.p_r)
                              <= 4.0 * sig_r + 1e-12)

    def test_mean_dominated_by_linear_model(self):
        """Ensemble mean infection marginals at t+1 are bounded by the
        linearized map applied to the t marginals, up to sampling noise."""
        g = generate("er", n=12, p=0.3, seed=21)
        m = ModelSpec("sis-nia", beta=0.2, delta=0.6)
        reps = 5000
        rep = mc_ensemble(m, g, init=0.5, t_max=4, n_reps=reps,
                          master_seed=3, marginals_at=(3, 4))
        p3 = rep.marginals[3][0]
        p4 = rep.marginals[4][0]
        A = g.adjacency()
        lin = (1.0 - m.delta) * p3 + m.beta * (A @ p3)
        # 4-sigma slack per node on both estimates
        slack = 4.0 * np.sqrt(0.25 / reps) * (1.0 + A.sum(axis=1))
        assert np.all(p4 <= lin + slack)


class TestExtinction:
    def test_census_and_cap(self):
        g = generate("complete", n=2)
        m = ModelSpec("sis-nia", beta=1.0, delta=1.0)
        assert extinction_time(m, g, seed=0, cap=40) is None

    def test_below_threshold_distribution(self):
        g = generate("complete", n=8)
        m = ModelSpec("sis-nia", beta=0.5 * 0.9 / 7, delta=0.9)
        times = [extinction_time(m, g, seed=17, cap=2000, replicate=r)
                 for r in range(50)]
        assert all(t is not None for t in times)
        assert np.median(times) <= 12


class TestCsv:
    def test_trajectory_roundtrip(self):
        g = generate("er", n=10, p=0.3, seed=1)
        m = ModelSpec("sirs", beta=0.5, delta=0.3, gamma=0.4)
        rec = mc_run(m, g, t_max=20, seed=5)
        back = TrajectoryRecord.from_csv(rec.to_csv())
        assert back.rows == rec.rows
        assert back.absorbed_at == rec.absorbed_at

    def test_trajectory_rejects_bad_header(self):
        with pytest.raises(MonteCarloError):
            TrajectoryRecord.from_csv("time,s,i,r\n0,1,2,3\n")

    def test_ensemble_roundtrip(self):
        g = generate("er", n=10, p=0.3, seed=1)
        m = ModelSpec("siv-id", beta=0.4, delta=0.3, gamma=0.4, theta=0.2)
        rep = mc_ensemble(m, g, t_max=15, n_reps=8, master_seed=2)
        cols = parse_ensemble_csv(ensemble_to_csv(rep))
        assert np.array_equal(cols["t"], rep.t)
        assert np.allclose(cols["i"], rep.i_mean, equal_nan=True)
        assert np.allclose(cols["s"], rep.s_mean, equal_nan=True)
        assert np.allclose(cols["r"], rep.r_mean, equal_nan=True)


class TestSivLongRun:
    def test_stationary_susceptible_fraction(self):
        g = generate("path", n=50)
        m = ModelSpec("siv-id", beta=0.05, delta=0.9, gamma=0.5, theta=0.5)
        reps = 200
        rep = mc_ensemble(m, g, t_max=60, n_reps=reps, master_seed=31,
                          marginals_at=(60,))
        assert rep.extinct_count == reps
        p_i, p_r = rep.marginals[60]
        s_frac = 1.0 - p_i.mean() - p_r.mean()
        target = 0.5  # gamma / (gamma + theta)
        sigma = math.sqrt(target * (1 - target) / (reps * g.n))
        assert abs(s_frac - target) <= 3.0 * sigma
