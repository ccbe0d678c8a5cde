# filtering/enkbf.py
"""
Ensemble Kalman-Bucy filters driven by one realized observation stream.

deterministic_correlated:
    dX^i = B dt + C dW^i + C~ dV^i + K [dY - H (X^i + x)/2 dt] - K C~^T P^+ (X^i - x)/2 dt,
    K = (P H^T + C~) R^-1
classical (C~ = 0):
    dX^i = B dt + C dW^i + P H^T R^-1 [dY - H X^i dt - Gamma dV^i]
transport (C~ = 0, constant C):
    dX^i = B dt + C C^T P^+ (X^i - x)/2 dt + P H^T R^-1 [dY - H (X^i + x)/2 dt]

x and P are the ensemble mean and covariance at the start of the step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import diagnostics
from .exceptions import DimensionError, ExplosionError, UnsupportedVariantError
from .kalman_bucy import GaussianBelief, integrate_moments
from .matrix_kit import FloatArray, eig_sym, empirical_moments, is_singular, pseudo_inverse
from .model import gamma_bar_m
from .noise import NoiseStreams, Stream
from .parallel import seed_map, seed_seq
from .sde_sim import GaussianInitial, as_initial, simulate_truth_and_obs
from .variants import FilterKind, FilterVariant

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleState:
    t: float
    particles: FloatArray
    mean: FloatArray
    cov: FloatArray
    singular_events: int = 0

    @classmethod
    def from_particles(cls, t, particles, singular_events=0):
        particles = np.ascontiguousarray(particles, dtype=float)
        mean, cov = empirical_moments(particles)
        return cls(t=float(t), particles=particles, mean=mean, cov=cov, singular_events=singular_events)

    @property
    def size(self):
        return self.particles.shape[1]

    def summary(self):
        lam = np.linalg.eigvalsh(self.cov)
        return EnsembleSummary(
            t=self.t,
            mean=self.mean,
            cov=self.cov,
            lambda_min=float(lam[0]),
            trace=float(np.trace(self.cov)),
            singular_events=self.singular_events,
        )


@dataclass(frozen=True)
class EnsembleSummary:
    t: float
    mean: FloatArray
    cov: FloatArray
    lambda_min: float
    trace: float
    singular_events: int


@dataclass(frozen=True)
class ParticleNoise:
    dw: FloatArray  # d_w x M
    dv: FloatArray  # d_v x M

    @classmethod
    def draw(cls, streams, step, model, m, dt):
        return cls(
            dw=streams.particle_increments(Stream.PARTICLE_W, step, model.d_w, m, dt),
            dv=streams.particle_increments(Stream.PARTICLE_V, step, model.d_v, m, dt),
        )

    def permuted(self, order):
        return ParticleNoise(dw=self.dw[:, order], dv=self.dv[:, order])


@dataclass
class FilterRun:
    summaries: List[EnsembleSummary]
    diagnostics: diagnostics.DiagnosticSeries
    snapshots: List[Tuple[float, FloatArray]] = field(default_factory=list)

    @property
    def final(self):
        return self.summaries[-1]


def check_variant(model, t, kind):
    kind = FilterKind(kind)
    if kind.requires_uncorrelated and model.is_correlated(t):
        raise UnsupportedVariantError(f"{kind.value} filter is only defined for C~ = 0")
    if kind is FilterKind.TRANSPORT and not model.c_constant:
        raise UnsupportedVariantError("transport filter needs a state-independent C")
    return kind


def needs_pseudo_inverse(model, t, kind):
    if kind is FilterKind.TRANSPORT:
        return True
    return kind is FilterKind.DETERMINISTIC_CORRELATED and model.is_correlated(t)


def filter_increment(model, kind, t, x, mean, cov, cov_pinv, dy, dt, noise):
    """
    Euler increment of every column of x given the moments used in the gain.
    Shared by the ensemble (empirical moments) and its mean-field copies
    (exact moments), so equal inputs give bitwise equal increments.
    """
    h = model.h(t)
    r_inv = model.r_inv(t)
    deviation = x - mean[:, None]
    increment = model.drift(t, x) * dt

    if kind is FilterKind.DETERMINISTIC_CORRELATED:
        c_tilde = model.c_tilde(t)
        gain = (cov @ h.T + c_tilde) @ r_inv
        increment = increment + model.diffusion(t, x, noise.dw) + c_tilde @ noise.dv
        increment = increment + gain @ (dy[:, None] - h @ (x + mean[:, None]) / 2.0 * dt)
        if cov_pinv is not None:
            increment = increment - gain @ c_tilde.T @ cov_pinv @ deviation / 2.0 * dt
    elif kind is FilterKind.CLASSICAL:
        gain = cov @ h.T @ r_inv
        increment = increment + model.diffusion(t, x, noise.dw)
        increment = increment + gain @ (dy[:, None] - h @ x * dt - model.gamma_matrix(t) @ noise.dv)
    else:
        c = model.c(t, mean)
        gain = cov @ h.T @ r_inv
        increment = increment + c @ c.T @ cov_pinv @ deviation / 2.0 * dt
        increment = increment + gain @ (dy[:, None] - h @ (x + mean[:, None]) / 2.0 * dt)
    return increment


def enkbf_step(model, state, dy, dt, noise, variant, step=None):
    """One Euler step of the ensemble; moments and P^+ are shared by all particles"""
    kind = check_variant(model, state.t, variant.tag)
    dy = np.asarray(dy, dtype=float).reshape(model.d_y)
    if noise.dw.shape != (model.d_w, state.size) or noise.dv.shape != (model.d_v, state.size):
        raise DimensionError("noise increments do not match the ensemble")

    singular_events = state.singular_events
    cov_pinv = None
    if needs_pseudo_inverse(model, state.t, kind):
        inverse = variant.inverse_for(model.d_x)
        if is_singular(eig_sym(state.cov), inverse):
            singular_events += 1
            logger.debug(f"Singular ensemble covariance at t={state.t:.6f}")
        cov_pinv = pseudo_inverse(state.cov, inverse)

    with np.errstate(over='ignore', invalid='ignore'):
        particles = state.particles + filter_increment(
            model, kind, state.t, state.particles, state.mean, state.cov, cov_pinv, dy, dt, noise
        )
    if not np.all(np.isfinite(particles)):
        raise ExplosionError(f"ensemble became non-finite at t={state.t:.6f}", step=step)
    return EnsembleState.from_particles(state.t + dt, particles, singular_events)


def initial_ensemble(model, initial, m, seed):
    """M particles drawn from the initial law on the reserved ensemble stream"""
    initial = as_initial(initial)
    if initial.dim != model.d_x:
        raise DimensionError(f"initial law has dimension {initial.dim}, model expects {model.d_x}")
    normals = NoiseStreams(seed).particle_normals(Stream.ENSEMBLE_INITIAL, 0, model.d_x, m)
    return initial.transform(normals)


def run_filter(model, obs, m, variant=None, seed=None, initial=None, dump_every=0, particles0=None):
    """
    Run the ensemble along `obs`. Particle noise uses its own streams keyed by
    `seed` (the record's seed by default), so the truth does not depend on M.
    """
    variant = variant or FilterVariant()
    seed = obs.seed if seed is None else seed
    grid = obs.grid
    kind = check_variant(model, 0.0, variant.tag)
    initial = GaussianInitial(mean=np.zeros(model.d_x), cov=np.eye(model.d_x)) if initial is None else initial

    if particles0 is None:
        particles0 = initial_ensemble(model, initial, m, seed)
    margin = gamma_bar_m(model, m, grid, x_samples=particles0.T)
    if margin <= 0.0:
        logger.warning(f"{model.name}: gamma_bar_M = {margin:.4f} <= 0 for M={m}; running anyway")

    streams = NoiseStreams(seed)
    state = EnsembleState.from_particles(grid.times[0], particles0)
    summaries = [state.summary()]
    snapshots = [(state.t, state.particles)] if dump_every else []

    logger.info(f"Running {kind.value} EnKBF on {model.name} with M={m}, {grid.n_steps} steps, seed {seed}")
    for k in range(grid.n_steps):
        noise = ParticleNoise.draw(streams, k, model, m, grid.dt)
        state = enkbf_step(model, state, obs.delta_y[k], grid.dt, noise, variant, step=k)
        summaries.append(state.summary())
        if dump_every and (k + 1) % dump_every == 0:
            snapshots.append((state.t, state.particles))

    if state.singular_events:
        logger.warning(f"{model.name}: {state.singular_events} singular covariance events (M={m}, seed {seed})")

    series = diagnostics.build_series(
        model,
        grid,
        trace_p=[s.trace for s in summaries],
        lambda_min_p=[s.lambda_min for s in summaries],
        m=m,
        singular_events=state.singular_events,
        x_samples=particles0.T,
    )
    return FilterRun(summaries=summaries, diagnostics=series, snapshots=snapshots)


@dataclass(frozen=True)
class ConsistencyRow:
    m: int
    mean_cov_err_t: float
    stderr_cov_err_t: float
    mean_mean_err_t: float
    stderr_mean_err_t: float


def consistency_sweep(model, m_list, n_seeds, grid, base_seed=0, initial=None, variant=None, threads=1):
    """
    Terminal |P^M - Pbar| and |x^M - mbar| against the Kalman-Bucy reference,
    averaged over seeds. Each seed simulates one truth shared by every M.
    """
    variant = variant or FilterVariant()
    initial = GaussianInitial(mean=np.zeros(model.d_x), cov=np.eye(model.d_x)) if initial is None else initial
    m_list = sorted(int(m) for m in m_list)

    def job(seed):
        obs = simulate_truth_and_obs(model, grid, initial, seed)
        reference = integrate_moments(model, obs, GaussianBelief(0.0, initial.mean, initial.cov), variant.tag)[-1]
        result = {}
        for m in m_list:
            final = run_filter(model, obs, m, variant, seed=seed, initial=initial).final
            result[m] = (
                float(np.linalg.norm(final.cov - reference.cov)),
                float(np.linalg.norm(final.mean - reference.mean)),
            )
        return result

    logger.info(f"Consistency sweep on {model.name}: M in {m_list}, {n_seeds} seeds")
    per_seed = seed_map(job, seed_seq(base_seed, n_seeds), threads)
    rows = []
    for m in m_list:
        cov_errors = np.array([result[m][0] for result in per_seed])
        mean_errors = np.array([result[m][1] for result in per_seed])
        rows.append(ConsistencyRow(
            m=m,
            mean_cov_err_t=float(np.mean(cov_errors)),
            stderr_cov_err_t=_stderr(cov_errors),
            mean_mean_err_t=float(np.mean(mean_errors)),
            stderr_mean_err_t=_stderr(mean_errors),
        ))
    return rows


def _stderr(values):
    return float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0


__all__ = [
    'ConsistencyRow',
    'EnsembleState',
    'EnsembleSummary',
    'FilterRun',
    'ParticleNoise',
    'enkbf_step',
    'filter_increment',
    'initial_ensemble',
    'needs_pseudo_inverse',
    'consistency_sweep',
    'run_filter',
]
