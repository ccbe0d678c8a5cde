# filtering/matrix_kit.py
"""
Dense symmetric linear algebra shared by every filter: symmetrization,
spectral decomposition, Moore-Penrose and regularized inverses and
empirical ensemble moments.

All functions are pure and work on float64 numpy arrays. Particle
ensembles are stored column-wise, i.e. as d_x x M matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import numpy.typing as npt

from .exceptions import ContractError, DimensionError, InsufficientEnsembleError

FloatArray = npt.NDArray[np.float64]

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """
    Eigen-decomposition p = q.T @ diag(lam) @ q of a symmetric matrix.
    Rows of `q` are the eigenvectors; `lam` is sorted descending.
    """
    q: FloatArray
    lam: FloatArray

    def reconstruct(self, values=None):
        """Rebuild q.T diag(values) q, with the stored eigenvalues by default"""
        values = self.lam if values is None else values
        return (self.q.T * values) @ self.q

    @property
    def lambda_max(self):
        return float(self.lam[0])

    @property
    def lambda_min(self):
        return float(self.lam[-1])


@dataclass(frozen=True)
class MoorePenrose:
    """Exact pseudo-inverse with a relative eigenvalue cut-off"""
    rel_tol: float

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ContractError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")

    @classmethod
    def for_dimension(cls, dim):
        return cls(rel_tol=dim * 1e-14)

    def cutoff(self, lambda_max):
        return self.rel_tol * max(lambda_max, 0.0)


@dataclass(frozen=True)
class Regularized:
    """(P^n + eps I)^-1 P^(n-1), Lipschitz in P for every eps > 0"""
    epsilon: float
    n: int = 1

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ContractError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.n) != self.n or self.n < 1:
            raise ContractError(f"n must be a positive integer, got {self.n}")


InverseStrategy = Union[MoorePenrose, Regularized]


def _as_square(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def sym(a):
    """Symmetric part (A + A^T) / 2"""
    a = _as_square(a)
    return (a + a.T) / 2.0


def is_symmetric(p, rtol=SYMMETRY_RTOL):
    p = _as_square(p)
    scale = max(1.0, float(np.max(np.abs(p))) if p.size else 0.0)
    return bool(np.max(np.abs(p - p.T), initial=0.0) <= rtol * scale)


def eig_sym(p):
    """
    Spectral decomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrized before decomposing so that round-off asymmetry
    from earlier steps does not leak into the eigenvectors.
    """
    p = _as_square(p)
    if not is_symmetric(p):
        raise ContractError("matrix is not symmetric within tolerance")
    lam, vectors = np.linalg.eigh(sym(p))
    order = np.argsort(lam, kind="stable")[::-1]
    return SpectralDecomposition(q=np.ascontiguousarray(vectors[:, order].T), lam=lam[order])


def check_spsd(p, rtol=PSD_RTOL):
    """Raise ContractError unless p is symmetric positive semidefinite within tolerance"""
    decomposition = eig_sym(p)
    if decomposition.lam.size and decomposition.lambda_min < -rtol * (1.0 + abs(decomposition.lambda_max)):
        raise ContractError(f"matrix is not positive semidefinite (lambda_min={decomposition.lambda_min:.3e})")
    return decomposition


def pseudo_inverse(p, strategy):
    """Moore-Penrose or regularized inverse of a spsd matrix"""
    decomposition = eig_sym(p)
    lam = np.clip(decomposition.lam, 0.0, None)

    if isinstance(strategy, MoorePenrose):
        keep = lam > strategy.cutoff(decomposition.lambda_max)
        inverted = np.zeros_like(lam)
        inverted[keep] = 1.0 / lam[keep]
    elif isinstance(strategy, Regularized):
        inverted = lam ** (strategy.n - 1) / (lam ** strategy.n + strategy.epsilon)
    else:
        raise ContractError(f"unknown inverse strategy {strategy!r}")

    return sym(decomposition.reconstruct(inverted))


def is_singular(decomposition, strategy):
    """True when the smallest eigenvalue falls under the Moore-Penrose cut-off"""
    if not isinstance(strategy, MoorePenrose):
        return False
    return decomposition.lambda_min <= strategy.cutoff(decomposition.lambda_max)


def _as_ensemble(particles):
    particles = np.asarray(particles, dtype=float)
    if particles.ndim != 2:
        raise DimensionError(f"particles must be a d_x x M matrix, got shape {particles.shape}")
    if particles.shape[1] < 2:
        raise InsufficientEnsembleError(f"need at least 2 particles, got {particles.shape[1]}")
    return np.ascontiguousarray(particles)


def _centered_outer_sum(left, right):
    # Reduce along the contiguous particle axis: numpy sums those pairwise,
    # so the result does not depend on how the caller schedules threads.
    return (left[:, None, :] * right[None, :, :]).sum(axis=-1)


def empirical_moments(particles):
    """Ensemble mean and (M-1)-normalized covariance of a d_x x M particle matrix"""
    particles = _as_ensemble(particles)
    m = particles.shape[1]
    mean = particles.sum(axis=1) / m
    centered = particles - mean[:, None]
    cov = sym(_centered_outer_sum(centered, centered) / (m - 1))
    return mean, cov


def cross_cov_sym(f_values, x_values):
    """
    Symmetrized empirical cross covariance
    (1/(M-1)) sum[(f - fbar)(x - xbar)^T + (x - xbar)(f - fbar)^T].
    """
    f_values = _as_ensemble(f_values)
    x_values = _as_ensemble(x_values)
    if f_values.shape != x_values.shape:
        raise DimensionError(f"shape mismatch {f_values.shape} vs {x_values.shape}")
    m = x_values.shape[1]
    f_centered = f_values - (f_values.sum(axis=1) / m)[:, None]
    x_centered = x_values - (x_values.sum(axis=1) / m)[:, None]
    half = _centered_outer_sum(f_centered, x_centered) / (m - 1)
    return half + half.T
