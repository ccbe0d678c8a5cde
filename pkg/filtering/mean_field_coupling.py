# filtering/mean_field_coupling.py
"""
Synchronous coupling of an ensemble filter with M independent copies of
its mean-field limit.

Copy i receives exactly the initial value, dW^i, dV^i and dY of particle i;
only the moments in the gain differ (exact Kalman-Bucy m, P instead of the
empirical ones). The particle error r^i = X^i - Xbar^i then measures
propagation of chaos.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .enkbf import EnsembleState, ParticleNoise, check_variant, enkbf_step, filter_increment, initial_ensemble, needs_pseudo_inverse
from .exceptions import DimensionError, ExplosionError, ModelValidationError, NumericalFailureError
from .kalman_bucy import GaussianBelief, integrate_moments
from .matrix_kit import FloatArray, MoorePenrose, eig_sym, pseudo_inverse
from .model import LinearModelSpec
from .noise import NoiseStreams
from .parallel import seed_map, seed_seq
from .sde_sim import GaussianInitial, simulate_truth_and_obs
from .variants import FilterKind, FilterVariant

logger = logging.getLogger(__name__)

REGULARITY_RTOL = 1e-10


@dataclass
class CoupledRun:
    ensemble: EnsembleState  # terminal state
    mf_copies: FloatArray  # terminal copies, d_x x M
    error_series: FloatArray  # (1/M) sum |r^i|^2 per grid time
    ensemble_paths: List[FloatArray] = field(default_factory=list)
    mf_paths: List[FloatArray] = field(default_factory=list)

    @property
    def error_t(self):
        return float(self.error_series[-1])

    @property
    def sup_error(self):
        return float(np.max(self.error_series))


@dataclass(frozen=True)
class SweepRow:
    m: int
    mean_err_t: float
    stderr_t: float
    mean_sup_err: float
    stderr_sup: float


def _exact_inverse(cov, t):
    decomposition = eig_sym(cov)
    if decomposition.lambda_min <= REGULARITY_RTOL * max(decomposition.lambda_max, 1.0):
        raise NumericalFailureError(
            f"mean-field covariance is not invertible at t={t:.6f} (lambda_min={decomposition.lambda_min:.3e})"
        )
    return pseudo_inverse(cov, MoorePenrose(REGULARITY_RTOL))


def mf_copy_step(model, particles, belief, dy, dt, noise, kind=FilterKind.DETERMINISTIC_CORRELATED):
    """Euler step of the mean-field copies with the exact moments of `belief`"""
    kind = check_variant(model, belief.t, kind)
    particles = np.asarray(particles, dtype=float)
    if particles.shape[0] != model.d_x:
        raise DimensionError(f"copies have {particles.shape[0]} rows, model expects {model.d_x}")
    dy = np.asarray(dy, dtype=float).reshape(model.d_y)

    cov_inv = _exact_inverse(belief.cov, belief.t) if needs_pseudo_inverse(model, belief.t, kind) else None
    with np.errstate(over='ignore', invalid='ignore'):
        updated = particles + filter_increment(
            model, kind, belief.t, particles, belief.mean, belief.cov, cov_inv, dy, dt, noise
        )
    if not np.all(np.isfinite(updated)):
        raise ExplosionError(f"mean-field copies became non-finite at t={belief.t:.6f}")
    return updated


def poc_error(ensemble_particles, mf_particles):
    """(1/M) sum_i |X^i - Xbar^i|^2"""
    x = np.asarray(ensemble_particles, dtype=float)
    x_bar = np.asarray(mf_particles, dtype=float)
    if x.shape != x_bar.shape or x.ndim != 2:
        raise DimensionError(f"shape mismatch {x.shape} vs {x_bar.shape}")
    return float(np.sum((x - x_bar) ** 2) / x.shape[1])


def _require_linear(model):
    if not isinstance(model, LinearModelSpec):
        raise ModelValidationError(
            f"{model.name}: the exact mean-field law is only available for linear-Gaussian models"
        )


def run_coupled(model, obs, m, initial, variant=None, seed=None, beliefs=None, keep_paths=False):
    """Ensemble and mean-field copies stepped in lockstep on shared noise"""
    _require_linear(model)
    variant = variant or FilterVariant()
    seed = obs.seed if seed is None else seed
    grid = obs.grid
    if beliefs is None:
        beliefs = integrate_moments(model, obs, GaussianBelief(0.0, initial.mean, initial.cov), variant.tag)

    particles0 = initial_ensemble(model, initial, m, seed)
    state = EnsembleState.from_particles(grid.times[0], particles0)
    copies = particles0.copy()
    streams = NoiseStreams(seed)
    errors = np.zeros(grid.n_steps + 1)
    ensemble_paths = [state.particles] if keep_paths else []
    mf_paths = [copies] if keep_paths else []

    for k in range(grid.n_steps):
        noise = ParticleNoise.draw(streams, k, model, m, grid.dt)
        copies = mf_copy_step(model, copies, beliefs[k], obs.delta_y[k], grid.dt, noise, variant.tag)
        state = enkbf_step(model, state, obs.delta_y[k], grid.dt, noise, variant, step=k)
        errors[k + 1] = poc_error(state.particles, copies)
        if keep_paths:
            ensemble_paths.append(state.particles)
            mf_paths.append(copies)

    return CoupledRun(
        ensemble=state,
        mf_copies=copies,
        error_series=errors,
        ensemble_paths=ensemble_paths,
        mf_paths=mf_paths,
    )


def _stderr(values):
    values = np.asarray(values, dtype=float)
    return float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0


def _summarize(m_list, per_seed):
    rows = []
    for m in m_list:
        errors_t = [result[m][0] for result in per_seed]
        sup_errors = [result[m][1] for result in per_seed]
        rows.append(SweepRow(
            m=int(m),
            mean_err_t=float(np.mean(errors_t)),
            stderr_t=_stderr(errors_t),
            mean_sup_err=float(np.mean(sup_errors)),
            stderr_sup=_stderr(sup_errors),
        ))
        logger.info(f"M={m}: mean error at T {rows[-1].mean_err_t:.4e} (stderr {rows[-1].stderr_t:.1e})")
    return rows


def _default_initial(model, initial):
    if initial is None:
        return GaussianInitial(mean=np.zeros(model.d_x), cov=np.eye(model.d_x))
    return initial


def poc_sweep(model, m_list, n_seeds, grid, base_seed=0, initial=None, variant=None, threads=1):
    """
    Propagation-of-chaos table over ensemble sizes. Every seed simulates one
    truth from the initial law and couples every M against it.
    """
    _require_linear(model)
    variant = variant or FilterVariant()
    initial = _default_initial(model, initial)
    m_list = sorted(int(m) for m in m_list)

    def job(seed):
        obs = simulate_truth_and_obs(model, grid, initial, seed)
        beliefs = integrate_moments(model, obs, GaussianBelief(0.0, initial.mean, initial.cov), variant.tag)
        result = {}
        for m in m_list:
            run = run_coupled(model, obs, m, initial, variant, seed=seed, beliefs=beliefs)
            result[m] = (run.error_t, run.sup_error)
        logger.debug(f"poc seed {seed} done")
        return result

    logger.info(f"Propagation-of-chaos sweep on {model.name}: M in {m_list}, {n_seeds} seeds")
    return _summarize(m_list, seed_map(job, seed_seq(base_seed, n_seeds), threads))


def self_convergence_sweep(model, m_list, n_seeds, grid, base_seed=0, initial=None, variant=None, threads=1,
                           m_ref_factor=8):
    """
    Surrogate for models without an exact mean-field law: every M-particle
    filter is compared with the first M particles of a reference filter of
    size m_ref_factor * max(m_list) that shares their initial values and noise.
    """
    variant = variant or FilterVariant()
    initial = _default_initial(model, initial)
    m_list = sorted(int(m) for m in m_list)
    m_ref = m_ref_factor * m_list[-1]

    def job(seed):
        obs = simulate_truth_and_obs(model, grid, initial, seed)
        streams = NoiseStreams(seed)
        reference_particles = initial_ensemble(model, initial, m_ref, seed)
        reference = EnsembleState.from_particles(grid.times[0], reference_particles)
        states = {m: EnsembleState.from_particles(grid.times[0], reference_particles[:, :m]) for m in m_list}
        errors = {m: np.zeros(grid.n_steps + 1) for m in m_list}

        for k in range(grid.n_steps):
            noise = ParticleNoise.draw(streams, k, model, m_ref, grid.dt)
            reference = enkbf_step(model, reference, obs.delta_y[k], grid.dt, noise, variant, step=k)
            for m in m_list:
                prefix = ParticleNoise(dw=noise.dw[:, :m], dv=noise.dv[:, :m])
                states[m] = enkbf_step(model, states[m], obs.delta_y[k], grid.dt, prefix, variant, step=k)
                errors[m][k + 1] = poc_error(states[m].particles, reference.particles[:, :m])
        return {m: (float(errors[m][-1]), float(np.max(errors[m]))) for m in m_list}

    logger.info(f"Self-convergence sweep (surrogate) on {model.name}: M in {m_list}, M_ref={m_ref}")
    return _summarize(m_list, seed_map(job, seed_seq(base_seed, n_seeds), threads))
