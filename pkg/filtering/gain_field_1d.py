# filtering/gain_field_1d.py
"""
Consistent mean-field gain and correction drift in one space dimension.

For a gridded density eta the consistent gain solves
    -(eta K0)' = (H - eta(H)) r^-1 eta,
which in 1-D integrates to the zero-flux-at-minus-infinity representative
    K0(x) = -(1 / eta(x)) int_{-inf}^x (H(y) - eta(H)) r^-1 eta(y) dy.
The eta-harmonic part of the drift is set to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .exceptions import ContractError, DimensionError
from .matrix_kit import FloatArray

DENSITY_FLOOR = 1e-12
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class DensityGrid1D:
    x: FloatArray
    eta: FloatArray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if x.ndim != 1 or x.shape != eta.shape or x.size < 3:
            raise DimensionError("density grid needs matching 1-D arrays with at least 3 points")
        spacing = np.diff(x)
        if np.any(spacing <= 0.0) or not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
            raise ContractError("density grid must be uniform and increasing")
        if np.any(eta < 0.0):
            raise ContractError("density must be nonnegative")
        mass = float(integrate.trapezoid(eta, x))
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ContractError(f"density integrates to {mass:.8f}, expected 1")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'eta', eta)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def n_pts(self):
        return self.x.size

    @classmethod
    def gaussian(cls, mean=0.0, var=1.0, x_min=-6.0, x_max=6.0, n_pts=1201):
        """N(mean, var) renormalized on the grid so that eta(1) = 1 up to rounding"""
        x = np.linspace(x_min, x_max, n_pts)
        eta = stats.norm.pdf(x, loc=mean, scale=np.sqrt(var))
        return cls(x=x, eta=eta / integrate.trapezoid(eta, x))

    @classmethod
    def from_samples(cls, samples, x_min, x_max, n_pts=1201):
        """Kernel density estimate of an ensemble snapshot, renormalized on the grid"""
        x = np.linspace(x_min, x_max, n_pts)
        try:
            kde = stats.gaussian_kde(np.ravel(samples))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise ContractError(f"cannot estimate a density from this snapshot: {exc}") from exc
        eta = kde(x)
        return cls(x=x, eta=eta / integrate.trapezoid(eta, x))

    def expectation(self, values):
        return float(integrate.trapezoid(values * self.eta, self.x))

    def valid_mask(self):
        return self.eta >= DENSITY_FLOOR * float(np.max(self.eta))


def _evaluate(h, x):
    values = h(x) if callable(h) else h
    values = np.broadcast_to(np.asarray(values, dtype=float), x.shape)
    return np.array(values)


def _extrapolate(x, values, valid):
    """Fill entries outside `valid` by linear extrapolation from the nearest valid pairs"""
    if np.all(valid):
        return values
    idx = np.flatnonzero(valid)
    if idx.size < 2:
        raise ContractError("density has fewer than two points above the floor")
    out = values.copy()
    left, right = idx[:2], idx[-2:]
    below = np.arange(x.size) < idx[0]
    above = np.arange(x.size) > idx[-1]
    slope_left = (values[left[1]] - values[left[0]]) / (x[left[1]] - x[left[0]])
    slope_right = (values[right[1]] - values[right[0]]) / (x[right[1]] - x[right[0]])
    out[below] = values[left[0]] + slope_left * (x[below] - x[left[0]])
    out[above] = values[right[1]] + slope_right * (x[above] - x[right[1]])
    interior_gaps = ~valid & ~below & ~above
    if np.any(interior_gaps):
        out[interior_gaps] = np.interp(x[interior_gaps], x[idx], values[idx])
    return out


def flux(density, h, r):
    """Probability flux eta K0 = -int_{-inf}^x (H - eta(H)) r^-1 eta dy"""
    if not r > 0.0:
        raise ContractError(f"r must be positive, got {r}")
    h_values = _evaluate(h, density.x)
    source = (h_values - density.expectation(h_values)) / r * density.eta
    return -integrate.cumulative_trapezoid(source, density.x, initial=0.0)


def gain_k0(density, h, r):
    """Consistent gain K0 on the density grid"""
    eta_k0 = flux(density, h, r)
    valid = density.valid_mask()
    k0 = np.zeros_like(eta_k0)
    k0[valid] = eta_k0[valid] / density.eta[valid]
    return _extrapolate(density.x, k0, valid)


def gain_correlated(k0, c_tilde, r):
    """Correlated gain: the uncorrelated one translated by C~ r^-1"""
    return np.asarray(k0, dtype=float) + c_tilde / r


def log_density_gradient(density):
    """d/dx log eta on the grid, extrapolated where eta is below the floor"""
    valid = density.valid_mask()
    log_eta = np.full_like(density.eta, -np.inf)
    log_eta[valid] = np.log(density.eta[valid])
    gradient = np.zeros_like(density.eta)
    finite = np.where(valid, log_eta, 0.0)
    gradient[valid] = np.gradient(finite, density.dx)[valid]
    # edges of the valid region: one-sided differences over valid points only
    idx = np.flatnonzero(valid)
    if idx.size >= 2:
        gradient[idx[0]] = (log_eta[idx[1]] - log_eta[idx[0]]) / (density.x[idx[1]] - density.x[idx[0]])
        gradient[idx[-1]] = (log_eta[idx[-1]] - log_eta[idx[-2]]) / (density.x[idx[-1]] - density.x[idx[-2]])
    return _extrapolate(density.x, gradient, valid)


def correction_drift_a(density, k, h, r, c_tilde):
    """
    a = -K (H + eta(H)) / 2 + (r / 2) K K' + K c_tilde eta' / (2 eta)
    with K' by central differences and eta'/eta as the log-density gradient.
    """
    k = np.asarray(k, dtype=float)
    if k.shape != density.x.shape:
        raise DimensionError(f"gain has shape {k.shape}, grid has {density.x.shape}")
    h_values = _evaluate(h, density.x)
    k_prime = np.gradient(k, density.dx)
    drift = -k * (h_values + density.expectation(h_values)) / 2.0 + (r / 2.0) * k * k_prime
    if c_tilde != 0.0:
        drift = drift + k * c_tilde * log_density_gradient(density) / 2.0
    return drift


def consistency_residual(density, k0, h, r, interior=None):
    """
    L2 norm over `interior` of -(eta K0)' - (H - eta(H)) r^-1 eta,
    with the derivative by central differences.
    """
    h_values = _evaluate(h, density.x)
    lhs = -np.gradient(density.eta * np.asarray(k0, dtype=float), density.dx)
    rhs = (h_values - density.expectation(h_values)) / r * density.eta
    mask = np.ones_like(density.x, dtype=bool) if interior is None else interior
    mask = mask.copy()
    mask[[0, -1]] = False
    return float(np.sqrt(np.sum((lhs - rhs)[mask] ** 2) * density.dx))
