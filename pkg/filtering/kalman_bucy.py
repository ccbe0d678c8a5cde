# filtering/kalman_bucy.py
"""
Exact linear-Gaussian reference.

The covariance follows a deterministic Riccati ODE and is advanced with
classical RK4; the mean is driven by the realized observation increments
and is advanced with Euler on the same grid as the particle filters.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ModelValidationError, NumericalFailureError, UnsupportedVariantError
from .matrix_kit import PSD_RTOL, FloatArray, eig_sym, sym
from .model import LinearModelSpec
from .variants import FilterKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianBelief:
    t: float
    mean: FloatArray
    cov: FloatArray

    @property
    def trace(self):
        return float(np.trace(self.cov))

    @property
    def lambda_min(self):
        return float(np.linalg.eigvalsh(self.cov)[0])


def _require_linear(model):
    if not isinstance(model, LinearModelSpec):
        raise ModelValidationError(f"{model.name}: the Kalman-Bucy reference needs a linear model")


def _require_variant_supported(model, t, variant):
    variant = FilterKind(variant)
    if variant.requires_uncorrelated and model.is_correlated(t):
        raise UnsupportedVariantError(f"{variant.value} filter is only defined for C~ = 0")
    return variant


def kalman_gain(model, t, p):
    """(P H^T + C~) R^-1"""
    return (p @ model.h(t).T + model.c_tilde(t)) @ model.r_inv(t)


def riccati_rhs(model, t, p, variant=FilterKind.DETERMINISTIC_CORRELATED):
    """Right-hand side of the covariance ODE for the given filter variant"""
    variant = _require_variant_supported(model, t, variant)
    b = model.b(t)
    c = model.c_const(t)
    h = model.h(t)
    r_inv = model.r_inv(t)
    rhs = b @ p + p @ b.T + c @ c.T

    if variant is FilterKind.DETERMINISTIC_CORRELATED:
        c_tilde = model.c_tilde(t)
        cross = p @ h.T + c_tilde
        rhs = rhs + c_tilde @ c_tilde.T - cross @ r_inv @ cross.T
    else:
        # classical and transport filters share this limiting Riccati equation
        rhs = rhs - p @ h.T @ r_inv @ h @ p
    return sym(rhs)


def _rk4_covariance(model, t, p, dt, variant):
    k1 = riccati_rhs(model, t, p, variant)
    k2 = riccati_rhs(model, t + dt / 2.0, p + dt / 2.0 * k1, variant)
    k3 = riccati_rhs(model, t + dt / 2.0, p + dt / 2.0 * k2, variant)
    k4 = riccati_rhs(model, t + dt, p + dt * k3, variant)
    return p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _project_spsd(p, step):
    """Re-symmetrize; clip slightly negative eigenvalues, abort on larger ones"""
    p = sym(p)
    if not np.all(np.isfinite(p)):
        raise NumericalFailureError("covariance became non-finite", step=step)
    decomposition = eig_sym(p)
    if decomposition.lambda_min >= 0.0:
        return p
    if decomposition.lambda_min < -PSD_RTOL * (1.0 + abs(decomposition.lambda_max)):
        raise NumericalFailureError(
            f"covariance lost positivity (lambda_min={decomposition.lambda_min:.3e})", step=step
        )
    return sym(decomposition.reconstruct(np.clip(decomposition.lam, 0.0, None)))


def integrate_moments(model, obs, belief0, variant=FilterKind.DETERMINISTIC_CORRELATED):
    """
    Kalman-Bucy mean and covariance along the observation record.
    Returns one GaussianBelief per grid time, starting with belief0.
    """
    _require_linear(model)
    grid = obs.grid
    variant = _require_variant_supported(model, 0.0, variant)

    mean = np.asarray(belief0.mean, dtype=float).copy()
    cov = _project_spsd(np.asarray(belief0.cov, dtype=float), step=0)
    beliefs = [GaussianBelief(t=float(grid.times[0]), mean=mean, cov=cov)]
    dt = grid.dt

    logger.debug(f"Integrating {variant.value} moments for {model.name} over {grid.n_steps} steps")
    for k, t in enumerate(grid.times[:-1]):
        gain = kalman_gain(model, t, cov)
        h = model.h(t)
        mean = mean + model.b(t) @ mean * dt + gain @ (obs.delta_y[k] - h @ mean * dt)
        cov = _project_spsd(_rk4_covariance(model, t, cov, dt, variant), step=k)
        if not np.all(np.isfinite(mean)):
            raise NumericalFailureError("mean became non-finite", step=k)
        beliefs.append(GaussianBelief(t=float(grid.times[k + 1]), mean=mean, cov=cov))
    return beliefs


def integrate_covariance(model, grid, cov0, variant=FilterKind.DETERMINISTIC_CORRELATED):
    """Riccati trajectory alone (no observations needed), one matrix per grid time"""
    _require_linear(model)
    variant = _require_variant_supported(model, 0.0, variant)
    cov = _project_spsd(np.atleast_2d(np.asarray(cov0, dtype=float)), step=0)
    covariances = [cov]
    for k, t in enumerate(grid.times[:-1]):
        cov = _project_spsd(_rk4_covariance(model, t, cov, grid.dt, variant), step=k)
        covariances.append(cov)
    return covariances
