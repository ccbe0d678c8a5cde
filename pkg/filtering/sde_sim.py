# filtering/sde_sim.py
"""
Truth and observation generation on a uniform Euler-Maruyama grid.

The observation increment of step k reuses the very dV_k that drives the
signal's C~ dV term; that shared increment is the noise correlation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ContractError, DimensionError, ExplosionError
from .matrix_kit import FloatArray, check_spsd
from .noise import NoiseStreams, Stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > 0.0:
            raise ContractError(f"t_end must be positive, got {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ContractError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self):
        return self.t_end / self.n_steps

    @cached_property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class GaussianInitial:
    """Initial law N(mean, cov); cov = 0 gives a deterministic start"""
    mean: FloatArray
    cov: FloatArray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(f"initial covariance {cov.shape} does not match mean of size {mean.size}")
        check_spsd(cov)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)

    @classmethod
    def point(cls, x0):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(mean=x0, cov=np.zeros((x0.size, x0.size)))

    @property
    def dim(self):
        return self.mean.size

    @cached_property
    def _root(self):
        decomposition = check_spsd(self.cov)
        return decomposition.q.T * np.sqrt(np.clip(decomposition.lam, 0.0, None))

    def transform(self, normals):
        """Map standard normals (d x n) onto samples of this law"""
        return self.mean[:, None] + self._root @ normals


def as_initial(x0):
    if isinstance(x0, GaussianInitial):
        return x0
    return GaussianInitial.point(x0)


@dataclass(frozen=True)
class ObservationRecord:
    grid: TimeGrid
    delta_y: FloatArray  # n_steps x d_y
    truth_path: FloatArray  # (n_steps + 1) x d_x
    seed: int

    def y_path(self):
        """Observation path with Y_0 = 0, accumulated in time order"""
        y = np.zeros((self.grid.n_steps + 1, self.delta_y.shape[1]))
        np.cumsum(self.delta_y, axis=0, out=y[1:])
        return y


def _check_finite(values, step, label):
    if not np.all(np.isfinite(values)):
        raise ExplosionError(f"{label} became non-finite", step=step)


def simulate_truth_and_obs(model, grid, x0, seed):
    """
    Euler-Maruyama truth path and observation increments
    dY_k = H(t_k, X_k) dt + Gamma(t_k) dV_k.
    """
    initial = as_initial(x0)
    if initial.dim != model.d_x:
        raise DimensionError(f"initial state has dimension {initial.dim}, model expects {model.d_x}")

    streams = NoiseStreams(seed)
    dt = grid.dt
    x = initial.transform(streams.standard_normal(Stream.TRUTH_INITIAL, 0, (model.d_x, 1)))[:, 0]
    truth = np.empty((grid.n_steps + 1, model.d_x))
    delta_y = np.empty((grid.n_steps, model.d_y))
    truth[0] = x

    logger.debug(f"Simulating {model.name} truth over {grid.n_steps} steps (seed {seed})")
    with np.errstate(over='ignore', invalid='ignore'):
        for k, t in enumerate(grid.times[:-1]):
            dw = streams.increments(Stream.TRUTH_W, k, model.d_w, dt)
            dv = streams.increments(Stream.TRUTH_V, k, model.d_v, dt)
            column = x[:, None]
            delta_y[k] = model.truth_observation(t, column)[:, 0] * dt + model.gamma_matrix(t) @ dv
            x = x + model.drift(t, column)[:, 0] * dt + model.diffusion(t, column, dw[:, None])[:, 0] + model.c_tilde(t) @ dv
            _check_finite(x, k, 'truth state')
            _check_finite(delta_y[k], k, 'observation increment')
            truth[k + 1] = x

    return ObservationRecord(grid=grid, delta_y=delta_y, truth_path=truth, seed=int(seed))


def simulate_paths(model, grid, x0, seed, n_paths):
    """
    Terminal states of `n_paths` independent signal paths (d_x x n_paths).
    Used for weak-order checks and Monte-Carlo reference laws.
    """
    initial = as_initial(x0)
    streams = NoiseStreams(seed)
    dt = grid.dt
    x = initial.transform(streams.particle_normals(Stream.PATHS_INITIAL, 0, model.d_x, n_paths))
    with np.errstate(over='ignore', invalid='ignore'):
        for k, t in enumerate(grid.times[:-1]):
            dw = streams.particle_increments(Stream.PATHS_W, k, model.d_w, n_paths, dt)
            dv = streams.particle_increments(Stream.PATHS_V, k, model.d_v, n_paths, dt)
            x = x + model.drift(t, x) * dt + model.diffusion(t, x, dw) + model.c_tilde(t) @ dv
            _check_finite(x, k, 'path ensemble')
    return x
