# filtering/model.py
"""
Filtering problem declarations.

A ModelSpec describes the signal dX = B(X)dt + C(X)dW + C~ dV and the
linear observation dY = H X dt + Gamma dV, where the same V enters both.
Coefficients are plain callables of time (and state where allowed).
Drift callables receive the whole ensemble as a d_x x M matrix.
"""
from __future__ import annotations

import inspect
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionError, InsufficientEnsembleError, ModelValidationError
from .matrix_kit import FloatArray, eig_sym, sym

logger = logging.getLogger(__name__)

R_MIN_EIGENVALUE = 1e-12

DriftFn = Callable[[float, FloatArray], FloatArray]
StateMatrixFn = Callable[[float, FloatArray], FloatArray]
TimeMatrixFn = Callable[[float], FloatArray]


@dataclass(frozen=True, kw_only=True)
class ModelSpec:
    """Coefficients, dimensions and Lipschitz metadata of a filtering problem"""
    d_x: int
    d_w: int
    d_v: int
    d_y: int
    drift_b: DriftFn
    diff_c: StateMatrixFn
    diff_c_tilde: TimeMatrixFn
    obs_h: TimeMatrixFn
    obs_gamma: TimeMatrixFn
    lip_b: float = 0.0
    lip_c: float = 0.0
    c_sup: float = 0.0
    c_constant: bool = True
    nonlinear_truth_h: Optional[StateMatrixFn] = None
    name: str = 'custom'

    # Coefficient evaluation

    def drift(self, t, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.asarray(self.drift_b(t, x[:, None]), dtype=float)[:, 0]
        return np.asarray(self.drift_b(t, x), dtype=float)

    def c(self, t, x):
        return np.asarray(self.diff_c(t, np.asarray(x, dtype=float)), dtype=float)

    def c_tilde(self, t):
        return np.asarray(self.diff_c_tilde(t), dtype=float)

    def h(self, t):
        return np.asarray(self.obs_h(t), dtype=float)

    def gamma_matrix(self, t):
        return np.asarray(self.obs_gamma(t), dtype=float)

    def r_inv(self, t):
        return np.linalg.inv(r_matrix(self, t))

    def is_correlated(self, t):
        return bool(np.any(self.c_tilde(t) != 0.0))

    def diffusion(self, t, x, dw):
        """C(X^i) dW^i for every column of the d_x x M matrices x and dw"""
        if self.c_constant:
            return self.c(t, x[:, 0]) @ dw
        columns = [self.c(t, x[:, i]) @ dw[:, i] for i in range(x.shape[1])]
        return np.stack(columns, axis=1)

    def truth_observation(self, t, x):
        """Observation drift used only when simulating the truth"""
        if self.nonlinear_truth_h is None:
            return self.h(t) @ x
        return np.asarray(self.nonlinear_truth_h(t, x), dtype=float)

    # Validation

    def validate(self, times, x_samples=None):
        """Check shapes and R > 0 at every time in `times`; raise ModelValidationError"""
        if min(self.d_x, self.d_w, self.d_v, self.d_y) < 1:
            raise ModelValidationError(f"{self.name}: all dimensions must be positive")
        if len(inspect.signature(self.diff_c_tilde).parameters) != 1:
            raise ModelValidationError(f"{self.name}: C~ may depend on time only")

        x_probe = np.zeros((self.d_x, 1)) if x_samples is None else np.asarray(x_samples, dtype=float).T
        expected = {
            'C': (self.d_x, self.d_w),
            'C~': (self.d_x, self.d_v),
            'H': (self.d_y, self.d_x),
            'Gamma': (self.d_y, self.d_v),
        }
        for t in np.atleast_1d(times):
            t = float(t)
            shapes = {
                'C': self.c(t, x_probe[:, 0]).shape,
                'C~': self.c_tilde(t).shape,
                'H': self.h(t).shape,
                'Gamma': self.gamma_matrix(t).shape,
            }
            for label, shape in shapes.items():
                if shape != expected[label]:
                    raise ModelValidationError(
                        f"{self.name}: {label} has shape {shape} at t={t}, expected {expected[label]}"
                    )
            if self.drift(t, x_probe).shape != x_probe.shape:
                raise ModelValidationError(f"{self.name}: drift does not preserve the ensemble shape")
            if self.d_v != self.d_y and self.is_correlated(t):
                raise ModelValidationError(f"{self.name}: correlated noise needs d_v == d_y")
            r_matrix(self, t)
        return self


@dataclass(frozen=True, kw_only=True)
class LinearModelSpec(ModelSpec):
    """Linear drift B_t x with state-independent C: the Kalman-Bucy setting"""
    b_matrix: TimeMatrixFn
    drift_b: Optional[DriftFn] = None

    def __post_init__(self):
        if not self.c_constant:
            raise ModelValidationError(f"{self.name}: linear models need constant C")
        if self.drift_b is None:
            b_matrix = self.b_matrix
            object.__setattr__(self, 'drift_b', lambda t, x: np.asarray(b_matrix(t), dtype=float) @ x)

    def b(self, t):
        return np.asarray(self.b_matrix(t), dtype=float)

    def c_const(self, t):
        return self.c(t, np.zeros(self.d_x))

    @classmethod
    def from_matrices(cls, b, c, c_tilde, h, gamma, name='custom'):
        """Time-homogeneous linear model from constant coefficient matrices"""
        b, c, c_tilde, h, gamma = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (b, c, c_tilde, h, gamma))
        d_x, d_w = c.shape
        d_y, d_v = gamma.shape
        if b.shape != (d_x, d_x) or c_tilde.shape != (d_x, d_v) or h.shape != (d_y, d_x):
            raise DimensionError(
                f"{name}: inconsistent shapes B{b.shape} C{c.shape} C~{c_tilde.shape} H{h.shape} Gamma{gamma.shape}"
            )
        return cls(
            name=name,
            d_x=d_x, d_w=d_w, d_v=d_v, d_y=d_y,
            b_matrix=lambda t: b,
            diff_c=lambda t, x: c,
            diff_c_tilde=lambda t: c_tilde,
            obs_h=lambda t: h,
            obs_gamma=lambda t: gamma,
            lip_b=float(np.linalg.norm(b, 2)),
            lip_c=0.0,
            c_sup=float(np.linalg.norm(c)),
        )


def r_matrix(model, t):
    """Observation noise covariance R_t = Gamma_t Gamma_t^T"""
    gamma_t = model.gamma_matrix(t)
    r = gamma_t @ gamma_t.T
    lam_min = float(np.linalg.eigvalsh((r + r.T) / 2.0)[0])
    if lam_min <= R_MIN_EIGENVALUE:
        raise ModelValidationError(f"{model.name}: R is singular at t={t} (lambda_min={lam_min:.3e})")
    return r


def _inf_lambda_min_ccT(model, t, x_samples):
    if model.c_constant:
        c = model.c(t, np.zeros(model.d_x))
        return float(np.linalg.eigvalsh(c @ c.T)[0])

    samples = np.atleast_2d(np.asarray(x_samples, dtype=float))
    if samples.size == 0:
        raise ModelValidationError(f"{model.name}: state-dependent C needs sample points")
    logger.warning(f"{model.name}: inf_x lambda_min(CC^T) approximated on {len(samples)} sample points")
    return min(float(np.linalg.eigvalsh(model.c(t, x) @ model.c(t, x).T)[0]) for x in samples)


def gamma(model, t, x_samples=None):
    """
    Noise non-degeneracy scalar
    lambda_min(C~ (I - R^-1) C~^T) + inf_x lambda_min(C(x) C(x)^T).
    The sample set is only consulted for state-dependent C.
    """
    c_tilde = model.c_tilde(t)
    if np.any(c_tilde != 0.0):
        if model.d_v != model.d_y:
            raise ModelValidationError(f"{model.name}: correlated noise needs d_v == d_y")
        inner = np.eye(model.d_v) - model.r_inv(t)
        correlated_term = eig_sym(sym(c_tilde @ inner @ c_tilde.T)).lambda_min
    else:
        correlated_term = 0.0
    return correlated_term + _inf_lambda_min_ccT(model, t, x_samples)


def gamma_bar_m(model, m, time_grid, x_samples=None):
    """
    Ensemble well-posedness margin
    inf_t gamma_t - 2/(M-1) (1 + sqrt(d_x)) (||C||_inf^2 + |C~_t|^2).
    """
    if m < 2:
        raise InsufficientEnsembleError(f"ensemble size must be at least 2, got {m}")
    times = np.atleast_1d(np.asarray(getattr(time_grid, 'times', time_grid), dtype=float))
    penalty = 2.0 / (m - 1) * (1.0 + np.sqrt(model.d_x))
    return min(
        gamma(model, t, x_samples) - penalty * (model.c_sup ** 2 + float(np.sum(model.c_tilde(t) ** 2)))
        for t in times
    )


def estimate_lipschitz(fn, t, x_samples):
    """
    Largest observed |fn(x) - fn(y)| / |x - y| over all sample pairs.
    Diagnostic only: bounds always use the declared constants.
    """
    samples = np.atleast_2d(np.asarray(x_samples, dtype=float))
    values = np.asarray(fn(t, samples.T), dtype=float).T
    if values.shape[0] != samples.shape[0]:
        raise DimensionError("fn must map a d_x x n sample matrix to n columns")
    best = 0.0
    for i in range(len(samples)):
        dx = np.linalg.norm(samples[i + 1:] - samples[i], axis=1)
        df = np.linalg.norm((values[i + 1:] - values[i]).reshape(len(dx), -1), axis=1)
        valid = dx > 0.0
        if np.any(valid):
            best = max(best, float(np.max(df[valid] / dx[valid])))
    return best
