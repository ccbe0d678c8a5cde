# filtering/diagnostics.py
"""
A-priori covariance bounds and run monitoring.

trace_bound gives the Gronwall upper bound on tr P over [0, T];
lambda_lower_ode integrates the comparison ODE whose solution stays below
the smallest eigenvalue of the mean-field covariance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import integrate

from .matrix_kit import FloatArray
from .model import gamma, gamma_bar_m

logger = logging.getLogger(__name__)

BOUND_RTOL = 1e-12


@dataclass(frozen=True)
class LambdaFloor:
    values: FloatArray
    clipped: bool = False


@dataclass(frozen=True)
class DiagnosticSeries:
    t: FloatArray
    trace_p: FloatArray
    lambda_min_p: FloatArray
    psi_bar: float
    lambda_floor: FloatArray
    gamma_bar_m: Optional[float] = None
    singular_events: int = 0
    floor_clipped: bool = False


@dataclass(frozen=True)
class Violation:
    step: int
    kind: str  # 'trace' or 'lambda_min'
    value: float
    bound: float


@dataclass
class ViolationReport:
    violations: List[Violation] = field(default_factory=list)

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def of_kind(self, kind):
        return [v for v in self.violations if v.kind == kind]


@dataclass(frozen=True)
class ExpectationCheck:
    mean_sup_trace: float
    stderr: float
    psi_bar: float

    @property
    def holds(self):
        return self.mean_sup_trace <= self.psi_bar


def _times(grid):
    return np.asarray(grid.times, dtype=float)


def _frobenius(a):
    return float(np.linalg.norm(a))


def _c_tilde_r_inv_h(model, t):
    return model.c_tilde(t) @ model.r_inv(t) @ model.h(t)


def trace_bound(model, grid, trace_p0):
    """
    Psi(T) = exp(2 int Lip(B) + d_x |C~ R^-1 H| dt)
             * (tr P0 + int ||C||^2 + |C~|^2 + d_x |C~ R^-1 C~^T| dt)
    with trapezoid time integrals over the grid.
    """
    times = _times(grid)
    rate = np.array([model.lip_b + model.d_x * _frobenius(_c_tilde_r_inv_h(model, t)) for t in times])
    forcing = np.array([
        model.c_sup ** 2
        + _frobenius(model.c_tilde(t)) ** 2
        + model.d_x * _frobenius(model.c_tilde(t) @ model.r_inv(t) @ model.c_tilde(t).T)
        for t in times
    ])
    return float(np.exp(2.0 * integrate.trapezoid(rate, times)) * (trace_p0 + integrate.trapezoid(forcing, times)))


def lambda_lower_ode(model, grid, psi_bar, lambda0, x_samples=None):
    """
    RK4 solution of
        l' = -2 Lip(B) sqrt(Psi) sqrt(l) - lmax(H^T R^-1 H) l^2 - 2 |C~ R^-1 H| l + inf gamma / 2
    on the grid. Time-dependent coefficients enter through their worst case
    over the grid. Negative values are clipped to 0 and flagged.
    """
    times = _times(grid)
    quadratic = max(
        float(np.linalg.eigvalsh(model.h(t).T @ model.r_inv(t) @ model.h(t))[-1]) for t in times
    )
    linear = max(_frobenius(_c_tilde_r_inv_h(model, t)) for t in times)
    forcing = min(gamma(model, t, x_samples) for t in times) / 2.0
    root_coefficient = 2.0 * model.lip_b * np.sqrt(psi_bar)

    if forcing <= 0.0:
        logger.warning(f"{model.name}: inf gamma <= 0, the eigenvalue floor is not guaranteed positive")

    def rhs(value):
        value = max(value, 0.0)
        return -root_coefficient * np.sqrt(value) - quadratic * value ** 2 - 2.0 * linear * value + forcing

    values = np.empty(times.size)
    values[0] = lambda0
    clipped = False
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        current = values[k]
        k1 = rhs(current)
        k2 = rhs(current + dt / 2.0 * k1)
        k3 = rhs(current + dt / 2.0 * k2)
        k4 = rhs(current + dt * k3)
        nxt = current + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if nxt < 0.0:
            nxt = 0.0
            clipped = True
        values[k + 1] = nxt

    if clipped:
        logger.warning(f"{model.name}: eigenvalue floor clipped at 0")
    return LambdaFloor(values=values, clipped=clipped)


def build_series(model, grid, trace_p, lambda_min_p, lambda0=None, m=None, singular_events=0, x_samples=None):
    """Diagnostics for one run; the floor starts at lambda_min(P_0) / 2 unless given"""
    trace_p = np.asarray(trace_p, dtype=float)
    lambda_min_p = np.asarray(lambda_min_p, dtype=float)
    psi_bar = trace_bound(model, grid, float(trace_p[0]))
    lambda0 = max(float(lambda_min_p[0]), 0.0) / 2.0 if lambda0 is None else lambda0
    floor = lambda_lower_ode(model, grid, psi_bar, lambda0, x_samples)
    return DiagnosticSeries(
        t=_times(grid),
        trace_p=trace_p,
        lambda_min_p=lambda_min_p,
        psi_bar=psi_bar,
        lambda_floor=floor.values,
        gamma_bar_m=None if m is None else gamma_bar_m(model, m, grid, x_samples),
        singular_events=int(singular_events),
        floor_clipped=floor.clipped,
    )


def check_run(series, diagnostics, check_floor=True):
    """
    Every step where tr P exceeds Psi(T) or lambda_min(P) drops below the floor.
    The floor applies to mean-field (Riccati) covariances; pass
    check_floor=False for ensemble covariances.
    """
    report = ViolationReport()
    for step, record in enumerate(series):
        trace = float(record.trace)
        if trace > diagnostics.psi_bar * (1.0 + BOUND_RTOL):
            report.violations.append(Violation(step, 'trace', trace, diagnostics.psi_bar))
        if check_floor:
            floor = float(diagnostics.lambda_floor[step])
            lam = float(record.lambda_min)
            if lam < floor - BOUND_RTOL * (1.0 + abs(floor)):
                report.violations.append(Violation(step, 'lambda_min', lam, floor))
    if report:
        logger.warning(f"{len(report)} bound violations")
    return report


def check_ensemble_trace(trace_series, psi_bar):
    """Seed average of sup_t tr P^M compared with Psi(T)"""
    sups = np.array([np.max(np.asarray(series, dtype=float)) for series in trace_series])
    stderr = float(np.std(sups, ddof=1) / np.sqrt(sups.size)) if sups.size > 1 else 0.0
    return ExpectationCheck(mean_sup_trace=float(np.mean(sups)), stderr=stderr, psi_bar=float(psi_bar))
