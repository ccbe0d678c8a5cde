from unittest import mock

import numpy as np
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose, assert_array_equal

from filtering.enkbf import (
    EnsembleState,
    ParticleNoise,
    check_variant,
    consistency_sweep,
    enkbf_step,
    initial_ensemble,
    run_filter,
)
from filtering.exceptions import DimensionError, ExplosionError, UnsupportedVariantError
from filtering.kalman_bucy import integrate_covariance
from filtering.matrix_kit import MoorePenrose, Regularized, is_singular
from filtering.model import LinearModelSpec, ModelSpec
from filtering.sde_sim import GaussianInitial, TimeGrid, simulate_truth_and_obs
from filtering.variants import FilterKind, FilterVariant

from .factories import lin1, lin2, linnd, scalar_model

DETERMINISTIC = FilterVariant()
CLASSICAL = FilterVariant(tag=FilterKind.CLASSICAL)
TRANSPORT = FilterVariant(tag=FilterKind.TRANSPORT)


def quiet_noise(model, m):
    return ParticleNoise(dw=np.zeros((model.d_w, m)), dv=np.zeros((model.d_v, m)))


def two_particles():
    return EnsembleState.from_particles(0.0, np.array([[0.0, 2.0]]))


class EnkbfStepTests(SimpleTestCase):
    def test_hand_executed_step(self):
        model = scalar_model(b=0.0, c=0.0, c_tilde=0.0, h=1.0, gamma=1.0)
        state = enkbf_step(model, two_particles(), [0.0], 0.1, quiet_noise(model, 2), DETERMINISTIC)
        assert_allclose(state.particles, [[-0.1, 1.7]], atol=1e-15)
        self.assertAlmostEqual(state.t, 0.1)
        self.assertEqual(state.singular_events, 0)

    def test_identical_particles_do_not_move(self):
        model = scalar_model(b=0.0, c=0.0, c_tilde=0.0)
        state = EnsembleState.from_particles(0.0, np.full((1, 4), 3.0))
        state = enkbf_step(model, state, [0.5], 0.1, quiet_noise(model, 4), DETERMINISTIC)
        assert_array_equal(state.particles, np.full((1, 4), 3.0))

    def test_classical_without_noise(self):
        model = scalar_model(b=0.0, c=0.0, h=1.0, gamma=1.0)
        state = enkbf_step(model, two_particles(), [0.3], 0.1, quiet_noise(model, 2), CLASSICAL)
        # gain 2: 2 (0.3 - x 0.1)
        assert_allclose(state.particles, [[0.6, 2.2]], atol=1e-15)

    def test_classical_perturbs_observations_per_particle(self):
        model = scalar_model(b=0.0, c=0.0, h=1.0, gamma=1.0)
        noise = ParticleNoise(dw=np.zeros((1, 2)), dv=np.array([[0.05, -0.05]]))
        state = enkbf_step(model, two_particles(), [0.3], 0.1, noise, CLASSICAL)
        assert_allclose(state.particles, [[0.5, 2.3]], atol=1e-15)

    def test_transport_step(self):
        model = scalar_model(b=0.0, c=1.0, h=1.0, gamma=1.0)
        noise = ParticleNoise(dw=np.ones((1, 2)), dv=np.ones((1, 2)))
        state = enkbf_step(model, two_particles(), [0.0], 0.1, noise, TRANSPORT)
        assert_allclose(state.particles, [[-0.125, 1.725]], atol=1e-15)

    def test_cached_moments_match_particles(self):
        model = lin2()
        rng = np.random.default_rng(4)
        state = EnsembleState.from_particles(0.0, rng.standard_normal((1, 10)))
        noise = ParticleNoise(dw=rng.standard_normal((1, 10)) * 0.1, dv=rng.standard_normal((1, 10)) * 0.1)
        state = enkbf_step(model, state, [0.02], 0.01, noise, DETERMINISTIC)
        assert_allclose(state.mean, state.particles.mean(axis=1), atol=1e-12)
        assert_allclose(state.cov, np.cov(state.particles), atol=1e-12)

    def test_noise_shape_checked(self):
        with self.assertRaises(DimensionError):
            enkbf_step(lin1(), two_particles(), [0.0], 0.1, quiet_noise(lin1(), 3), DETERMINISTIC)

    def test_explosion_reports_step(self):
        model = scalar_model(b=1e200, c=0.0)
        with self.assertRaises(ExplosionError) as cm:
            enkbf_step(model, two_particles(), [0.0], 1e200, quiet_noise(model, 2), DETERMINISTIC, step=4)
        self.assertEqual(cm.exception.step, 4)

    def test_singular_covariance_is_counted_under_moore_penrose(self):
        model = linnd()
        state = EnsembleState.from_particles(0.0, np.array([[0.0, 1.0], [0.0, 1.0]]))
        noise = quiet_noise(model, 2)
        exact = enkbf_step(model, state, [0.0, 0.0], 0.01, noise, FilterVariant(inverse=MoorePenrose(1e-10)))
        regularized = enkbf_step(
            model, state, [0.0, 0.0], 0.01, noise, FilterVariant(inverse=Regularized(epsilon=1e-6)),
        )
        self.assertEqual(exact.singular_events, 1)
        self.assertEqual(regularized.singular_events, 0)

    def test_default_cutoff_scales_with_dimension(self):
        model = linnd()
        state = EnsembleState.from_particles(0.0, np.array([[0.0, 1.0, 2.0], [0.0, 2.0, 1.0]]))
        with mock.patch('filtering.enkbf.is_singular', wraps=is_singular) as check:
            enkbf_step(model, state, [0.0, 0.0], 0.01, quiet_noise(model, 3), DETERMINISTIC)
        self.assertEqual(check.call_args[0][1], MoorePenrose(rel_tol=2e-14))

    def test_nearly_singular_covariance_counts_only_under_coarse_cutoff(self):
        model = linnd()
        # covariance diag(1, 3e-12)
        state = EnsembleState.from_particles(0.0, np.array([[-1.0, 0.0, 1.0], [1e-6, -2e-6, 1e-6]]))
        noise = quiet_noise(model, 3)
        coarse = enkbf_step(model, state, [0.0, 0.0], 0.01, noise, FilterVariant(inverse=MoorePenrose(1e-10)))
        default = enkbf_step(model, state, [0.0, 0.0], 0.01, noise, DETERMINISTIC)
        self.assertEqual(coarse.singular_events, 1)
        self.assertEqual(default.singular_events, 0)

    def test_exchangeability(self):
        model = lin2()
        grid = TimeGrid(t_end=0.2, n_steps=20)
        obs = simulate_truth_and_obs(model, grid, np.zeros(1), seed=6)
        rng = np.random.default_rng(6)
        order = rng.permutation(8)
        state = EnsembleState.from_particles(0.0, rng.standard_normal((1, 8)))
        shuffled = EnsembleState.from_particles(0.0, state.particles[:, order])
        for k in range(grid.n_steps):
            noise = ParticleNoise(
                dw=rng.standard_normal((1, 8)) * np.sqrt(grid.dt),
                dv=rng.standard_normal((1, 8)) * np.sqrt(grid.dt),
            )
            state = enkbf_step(model, state, obs.delta_y[k], grid.dt, noise, DETERMINISTIC)
            shuffled = enkbf_step(model, shuffled, obs.delta_y[k], grid.dt, noise.permuted(order), DETERMINISTIC)
        assert_allclose(shuffled.particles, state.particles[:, order], atol=1e-12)


class VariantSupportTests(SimpleTestCase):
    def test_uncorrelated_variants_reject_correlated_noise(self):
        for kind in (FilterKind.CLASSICAL, FilterKind.TRANSPORT):
            with self.assertRaises(UnsupportedVariantError):
                check_variant(lin2(), 0.0, kind)

    def test_transport_needs_constant_c(self):
        one = np.ones((1, 1))
        model = ModelSpec(
            d_x=1, d_w=1, d_v=1, d_y=1,
            drift_b=lambda t, x: 0 * x,
            diff_c=lambda t, x: (1.0 + x[0] ** 2) * one,
            diff_c_tilde=lambda t: 0 * one,
            obs_h=lambda t: one,
            obs_gamma=lambda t: one,
            c_constant=False,
        )
        with self.assertRaises(UnsupportedVariantError):
            check_variant(model, 0.0, FilterKind.TRANSPORT)
        self.assertIs(check_variant(model, 0.0, 'classical'), FilterKind.CLASSICAL)

    def test_run_filter_rejects_before_stepping(self):
        obs = simulate_truth_and_obs(lin2(), TimeGrid(t_end=0.1, n_steps=10), np.zeros(1), seed=0)
        with self.assertRaises(UnsupportedVariantError):
            run_filter(lin2(), obs, 10, CLASSICAL)


class InitialEnsembleTests(SimpleTestCase):
    def test_prefix_stable_across_ensemble_sizes(self):
        initial = GaussianInitial(mean=[1.0, -1.0], cov=[[2.0, 0.5], [0.5, 1.0]])
        small = initial_ensemble(linnd(), initial, 4, seed=9)
        large = initial_ensemble(linnd(), initial, 64, seed=9)
        self.assertEqual(large.shape, (2, 64))
        assert_allclose(small, large[:, :4], rtol=1e-14, atol=1e-15)

    def test_dimension_checked(self):
        with self.assertRaises(DimensionError):
            initial_ensemble(lin1(), GaussianInitial(mean=[0.0, 0.0], cov=np.eye(2)), 4, seed=0)


class RunFilterTests(SimpleTestCase):
    def setUp(self):
        self.grid = TimeGrid(t_end=1.0, n_steps=100)

    def test_summaries_and_snapshots(self):
        obs = simulate_truth_and_obs(lin2(), self.grid, np.zeros(1), seed=1)
        run = run_filter(lin2(), obs, 16, dump_every=25)
        self.assertEqual(len(run.summaries), self.grid.n_steps + 1)
        assert_allclose([s.t for s in run.summaries], self.grid.times, atol=1e-12)
        self.assertEqual([t for t, _ in run.snapshots], [s.t for s in run.summaries[::25]])
        self.assertEqual(run.snapshots[-1][1].shape, (1, 16))
        self.assertAlmostEqual(run.diagnostics.gamma_bar_m, 1.5 - 4.0 / 15.0 * 2.0)
        self.assertEqual(run.diagnostics.singular_events, 0)

    def test_same_seed_same_run(self):
        obs = simulate_truth_and_obs(lin1(), self.grid, np.zeros(1), seed=2)
        first = run_filter(lin1(), obs, 8).final
        second = run_filter(lin1(), obs, 8).final
        assert_array_equal(first.mean, second.mean)
        assert_array_equal(first.cov, second.cov)

    def test_rank_bounded_by_ensemble_size(self):
        eye = np.eye(2)
        model = LinearModelSpec.from_matrices(b=-eye, c=eye, c_tilde=0 * eye, h=eye, gamma=eye, name='uncorrelated-2d')
        obs = simulate_truth_and_obs(model, self.grid, np.zeros(2), seed=3)
        with self.assertLogs('filtering.enkbf', level='WARNING'):
            run = run_filter(model, obs, 2)
        for summary in run.summaries:
            lam = np.linalg.eigvalsh(summary.cov)
            self.assertLessEqual(abs(lam[0]), 1e-12 * (1.0 + lam[-1]))

    def test_zero_noise_model_stays_at_initial_condition(self):
        model = scalar_model(b=0.0, c=0.0, c_tilde=0.0, h=0.0, gamma=1.0)
        obs = simulate_truth_and_obs(model, self.grid, np.zeros(1), seed=4)
        particles0 = np.array([[-1.0, 0.5, 2.0]])
        with self.assertLogs('filtering.enkbf', level='WARNING'):
            run = run_filter(model, obs, 3, particles0=particles0, dump_every=10)
        for _, particles in run.snapshots:
            assert_array_equal(particles, particles0)

    def test_covariance_stays_spsd_for_every_variant(self):
        cases = [(lin1(), DETERMINISTIC), (lin1(), CLASSICAL), (lin1(), TRANSPORT), (lin2(), DETERMINISTIC)]
        for model, variant in cases:
            obs = simulate_truth_and_obs(model, self.grid, np.zeros(1), seed=5)
            run = run_filter(model, obs, 20, variant)
            for summary in run.summaries:
                lam = np.linalg.eigvalsh(summary.cov)
                self.assertGreaterEqual(lam[0], -1e-10 * (1.0 + lam[-1]), msg=f"{model.name} {variant.tag.value}")


@tag('slow')
class EnsembleConvergenceTests(SimpleTestCase):
    def test_lin1_trace_tracks_riccati(self):
        grid = TimeGrid(t_end=1.0, n_steps=1000)
        initial = GaussianInitial(mean=[0.0], cov=[[0.0]])
        obs = simulate_truth_and_obs(lin1(), grid, initial, seed=21)
        run = run_filter(lin1(), obs, 1000, initial=initial)
        riccati = np.array([p[0, 0] for p in integrate_covariance(lin1(), grid, np.zeros((1, 1)))])
        traces = np.array([s.trace for s in run.summaries])
        self.assertLess(np.max(np.abs(traces - riccati)), 0.15)
        self.assertLess(abs(traces[-1] - np.tanh(1.0)), 0.1)

    def test_lin2_never_singular_above_ensemble_threshold(self):
        grid = TimeGrid(t_end=1.0, n_steps=1000)
        for seed in range(50):
            obs = simulate_truth_and_obs(lin2(), grid, np.zeros(1), seed=seed)
            run = run_filter(lin2(), obs, 16, FilterVariant(inverse=MoorePenrose(1e-10)))
            self.assertEqual(run.diagnostics.singular_events, 0, msg=f"seed {seed}")

    def test_consistency_rate(self):
        m_list = [32, 128, 512, 2048]
        rows = consistency_sweep(lin1(), m_list, 32, TimeGrid(t_end=1.0, n_steps=1000), threads=4)
        errors = np.array([row.mean_cov_err_t for row in rows])
        self.assertEqual([row.m for row in rows], m_list)
        self.assertTrue(np.all(np.diff(errors) < 0.0), msg=str(errors))
        slope = np.polyfit(np.log(m_list), np.log(errors), 1)[0]
        self.assertGreaterEqual(slope, -0.8)
        self.assertLessEqual(slope, -0.2)
        self.assertLessEqual(errors[-1], 0.05)

    def test_uncorrelated_variants_match_kalman_bucy(self):
        grid = TimeGrid(t_end=1.0, n_steps=1000)
        for variant in (CLASSICAL, TRANSPORT):
            rows = consistency_sweep(lin1(), [2048], 32, grid, variant=variant, threads=4)
            self.assertLessEqual(rows[0].mean_cov_err_t, 0.05, msg=variant.tag.value)
