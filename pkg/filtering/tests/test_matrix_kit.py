import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from filtering.exceptions import ContractError, DimensionError, InsufficientEnsembleError
from filtering.matrix_kit import (
    MoorePenrose,
    Regularized,
    check_spsd,
    cross_cov_sym,
    eig_sym,
    empirical_moments,
    is_singular,
    pseudo_inverse,
    sym,
)

from .factories import random_spsd


class SymTests(SimpleTestCase):
    def test_symmetric_part(self):
        assert_array_equal(sym(np.array([[0.0, 2.0], [0.0, 0.0]])), [[0.0, 1.0], [1.0, 0.0]])
        assert_array_equal(sym(np.array([[1.0, 3.0], [1.0, 1.0]])), [[1.0, 2.0], [2.0, 1.0]])
        assert_array_equal(sym(np.eye(3)), np.eye(3))

    def test_non_square_rejected(self):
        with self.assertRaises(DimensionError):
            sym(np.zeros((2, 3)))


class EigSymTests(SimpleTestCase):
    def test_diagonal(self):
        decomposition = eig_sym(np.diag([1.0, 3.0]))
        assert_allclose(decomposition.lam, [3.0, 1.0])
        assert_allclose(np.abs(decomposition.q), [[0.0, 1.0], [1.0, 0.0]])

    def test_rank_one(self):
        decomposition = eig_sym(np.ones((2, 2)))
        assert_allclose(decomposition.lam, [2.0, 0.0], atol=1e-14)

    def test_zero_matrix(self):
        assert_array_equal(eig_sym(np.zeros((2, 2))).lam, [0.0, 0.0])

    def test_reconstruction_and_orthogonality(self):
        rng = np.random.default_rng(11)
        for dim in range(1, 9):
            p = random_spsd(rng, dim, dim)
            decomposition = eig_sym(p)
            assert_allclose(decomposition.reconstruct(), p, atol=1e-10)
            assert_allclose(decomposition.q @ decomposition.q.T, np.eye(dim), atol=1e-10)
            self.assertTrue(np.all(np.diff(decomposition.lam) <= 0.0))

    def test_asymmetric_rejected(self):
        with self.assertRaises(ContractError):
            eig_sym(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_check_spsd_rejects_negative_eigenvalue(self):
        with self.assertRaises(ContractError):
            check_spsd(np.diag([1.0, -0.1]))


class PseudoInverseTests(SimpleTestCase):
    def test_examples(self):
        assert_allclose(pseudo_inverse(np.diag([2.0, 0.0]), MoorePenrose(1e-12)), np.diag([0.5, 0.0]))
        assert_allclose(pseudo_inverse(np.ones((2, 2)), MoorePenrose(1e-12)), np.full((2, 2), 0.25), atol=1e-14)
        assert_allclose(pseudo_inverse(np.eye(1), Regularized(epsilon=1.0, n=1)), [[0.5]])

    def test_penrose_conditions(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            dim = int(rng.integers(1, 9))
            rank = int(rng.integers(0, dim + 1))
            p = random_spsd(rng, dim, rank)
            p_plus = pseudo_inverse(p, MoorePenrose(1e-10))
            assert_allclose(p @ p_plus @ p, p, atol=1e-9)
            assert_allclose(p_plus @ p @ p_plus, p_plus, atol=1e-9)
            assert_allclose((p @ p_plus).T, p @ p_plus, atol=1e-9)
            assert_allclose((p_plus @ p).T, p_plus @ p, atol=1e-9)

    def test_regularized_converges_to_moore_penrose(self):
        rng = np.random.default_rng(5)
        p = random_spsd(rng, 4, 2)
        exact = pseudo_inverse(p, MoorePenrose(1e-10))
        errors = [
            np.max(np.abs(pseudo_inverse(p, Regularized(epsilon=eps, n=2)) - exact))
            for eps in (1e-2, 1e-4, 1e-6)
        ]
        self.assertTrue(errors[0] > errors[1] > errors[2])
        self.assertLess(errors[2], 1e-4)

    def test_singularity_only_under_moore_penrose(self):
        singular = eig_sym(np.diag([1.0, 0.0]))
        regular = eig_sym(np.diag([1.0, 0.5]))
        self.assertTrue(is_singular(singular, MoorePenrose(1e-10)))
        self.assertFalse(is_singular(regular, MoorePenrose(1e-10)))
        self.assertFalse(is_singular(singular, Regularized(epsilon=1e-3)))

    def test_default_cutoff_scales_with_dimension(self):
        self.assertAlmostEqual(MoorePenrose.for_dimension(3).rel_tol, 3e-14)

    def test_invalid_strategies(self):
        with self.assertRaises(ContractError):
            MoorePenrose(rel_tol=1.5)
        with self.assertRaises(ContractError):
            Regularized(epsilon=0.0)
        with self.assertRaises(ContractError):
            Regularized(epsilon=1.0, n=0)


class EmpiricalMomentsTests(SimpleTestCase):
    def test_two_particles(self):
        mean, cov = empirical_moments(np.array([[0.0, 2.0]]))
        assert_allclose(mean, [1.0])
        assert_allclose(cov, [[2.0]])

    def test_three_particles(self):
        mean, cov = empirical_moments(np.array([[-1.0, 0.0, 1.0]]))
        assert_allclose(mean, [0.0])
        assert_allclose(cov, [[1.0]])

    def test_identical_particles(self):
        _, cov = empirical_moments(np.full((2, 5), 3.0))
        assert_array_equal(cov, np.zeros((2, 2)))

    def test_rank_bounded_by_ensemble_size(self):
        particles = np.random.default_rng(0).standard_normal((5, 3))
        _, cov = empirical_moments(particles)
        self.assertLessEqual(np.linalg.matrix_rank(cov), 2)
        check_spsd(cov)

    def test_single_particle_rejected(self):
        with self.assertRaises(InsufficientEnsembleError):
            empirical_moments(np.zeros((2, 1)))


class CrossCovTests(SimpleTestCase):
    def test_same_values_give_twice_the_covariance(self):
        x = np.random.default_rng(1).standard_normal((3, 10))
        _, cov = empirical_moments(x)
        assert_allclose(cross_cov_sym(x, x), 2.0 * cov, atol=1e-12)

    def test_constant_f(self):
        x = np.random.default_rng(2).standard_normal((2, 6))
        assert_allclose(cross_cov_sym(np.ones((2, 6)), x), np.zeros((2, 2)), atol=1e-15)

    def test_scalar_example(self):
        assert_allclose(cross_cov_sym(np.array([[0.0, 4.0]]), np.array([[0.0, 2.0]])), [[8.0]])

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(3)
        out = cross_cov_sym(rng.standard_normal((4, 7)), rng.standard_normal((4, 7)))
        assert_array_equal(out, out.T)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            cross_cov_sym(np.zeros((2, 4)), np.zeros((2, 5)))
