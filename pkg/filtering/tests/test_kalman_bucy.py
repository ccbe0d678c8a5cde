import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from filtering.exceptions import ModelValidationError, NumericalFailureError, UnsupportedVariantError
from filtering.kalman_bucy import GaussianBelief, integrate_covariance, integrate_moments, kalman_gain, riccati_rhs
from filtering.sde_sim import TimeGrid, simulate_truth_and_obs
from filtering.variants import FilterKind

from .factories import lin1, lin2, scalar_model, sin_model


class RiccatiRhsTests(SimpleTestCase):
    def test_fixed_points(self):
        assert_allclose(riccati_rhs(lin1(), 0.0, np.eye(1)), [[0.0]])
        assert_allclose(riccati_rhs(lin2(), 0.0, np.eye(1)), [[0.0]], atol=1e-15)

    def test_zero_noise_zero_covariance(self):
        model = scalar_model(c=0.0)
        assert_allclose(riccati_rhs(model, 0.0, np.zeros((1, 1))), [[0.0]])

    def test_classical_and_transport_share_the_uncorrelated_riccati(self):
        p = np.array([[0.3]])
        expected = riccati_rhs(lin1(), 0.0, p)
        for kind in (FilterKind.CLASSICAL, FilterKind.TRANSPORT):
            assert_allclose(riccati_rhs(lin1(), 0.0, p, kind), expected)

    def test_uncorrelated_variants_rejected_with_correlation(self):
        with self.assertRaises(UnsupportedVariantError):
            riccati_rhs(lin2(), 0.0, np.eye(1), FilterKind.CLASSICAL)

    def test_gain(self):
        assert_allclose(kalman_gain(lin2(), 0.0, np.eye(1)), [[1.0]])


class IntegrateTests(SimpleTestCase):
    def test_lin1_tanh_oracle(self):
        covariances = integrate_covariance(lin1(), TimeGrid(t_end=1.0, n_steps=10_000), np.zeros((1, 1)))
        self.assertLess(abs(covariances[-1][0, 0] - np.tanh(1.0)), 1e-4)

    def test_lin2_fixed_point(self):
        covariances = integrate_covariance(lin2(), TimeGrid(t_end=1.0, n_steps=1000), np.eye(1))
        self.assertLess(max(abs(p[0, 0] - 1.0) for p in covariances), 1e-8)

    def test_rk4_order(self):
        errors = [
            abs(integrate_covariance(lin1(), TimeGrid(t_end=1.0, n_steps=n), np.zeros((1, 1)))[-1][0, 0] - np.tanh(1.0))
            for n in (10, 20)
        ]
        ratio = errors[0] / errors[1]
        self.assertGreater(ratio, 13.0)
        self.assertLess(ratio, 19.0)

    def test_moments_follow_observations(self):
        grid = TimeGrid(t_end=1.0, n_steps=200)
        obs = simulate_truth_and_obs(lin1(), grid, np.zeros(1), seed=3)
        beliefs = integrate_moments(lin1(), obs, GaussianBelief(0.0, np.zeros(1), np.zeros((1, 1))))
        self.assertEqual(len(beliefs), grid.n_steps + 1)
        assert_allclose([b.t for b in beliefs], grid.times)
        # P_0 = 0: no gain on the first step
        self.assertEqual(beliefs[1].mean[0], 0.0)
        self.assertAlmostEqual(beliefs[-1].cov[0, 0], np.tanh(1.0), places=6)

    def test_no_observation_gain_gives_lyapunov(self):
        model = scalar_model(b=-1.0, c=1.0, h=0.0, gamma=1.0)
        grid = TimeGrid(t_end=1.0, n_steps=1000)
        obs = simulate_truth_and_obs(model, grid, np.zeros(1), seed=0)
        beliefs = integrate_moments(model, obs, GaussianBelief(0.0, np.ones(1), np.zeros((1, 1))))
        self.assertAlmostEqual(beliefs[-1].cov[0, 0], (1.0 - np.exp(-2.0)) / 2.0, places=8)
        self.assertAlmostEqual(beliefs[-1].mean[0], (1.0 - grid.dt) ** grid.n_steps, places=12)

    def test_nonlinear_model_rejected(self):
        with self.assertRaises(ModelValidationError):
            integrate_covariance(sin_model(), TimeGrid(t_end=1.0, n_steps=5), np.eye(1))

    def test_loss_of_positivity_aborts(self):
        model = scalar_model(b=0.0, c=0.0, h=10.0, gamma=1.0)
        with self.assertRaises(NumericalFailureError) as cm:
            integrate_covariance(model, TimeGrid(t_end=1.0, n_steps=10), np.eye(1))
        self.assertIsNotNone(cm.exception.step)
