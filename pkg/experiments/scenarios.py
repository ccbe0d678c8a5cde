# experiments/scenarios.py
"""
Built-in filtering problems. Lipschitz constants are declared here so that
the a-priori bounds never depend on estimation.
"""
import logging

import numpy as np

from filtering.exceptions import ModelValidationError
from filtering.model import LinearModelSpec, ModelSpec

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)


def lin1(params):
    """Scalar Brownian signal, uncorrelated noise: P(t) = tanh(t) from P0 = 0"""
    return LinearModelSpec.from_matrices(b=0.0, c=1.0, c_tilde=0.0, h=1.0, gamma=1.0, name='LIN1')


def lin2(params):
    """Scalar signal with correlated noise; P = 1 is a fixed point of the Riccati equation"""
    return LinearModelSpec.from_matrices(b=0.0, c=1.0, c_tilde=1.0, h=1.0, gamma=SQRT2, name='LIN2')


def linnd(params):
    eye = np.eye(2)
    return LinearModelSpec.from_matrices(
        b=-eye, c=eye, c_tilde=0.5 * eye, h=eye, gamma=SQRT2 * eye, name='LINND'
    )


def nonlin_sin(params):
    c_tilde = float(params.get('c_tilde', 0.0))
    if c_tilde not in (0.0, 0.5):
        logger.warning(f"NONLIN_SIN is registered for c_tilde in {{0, 0.5}}, got {c_tilde}")
    one = np.ones((1, 1))
    return ModelSpec(
        name='NONLIN_SIN',
        d_x=1, d_w=1, d_v=1, d_y=1,
        drift_b=lambda t, x: -x + np.sin(x),
        diff_c=lambda t, x: one,
        diff_c_tilde=lambda t: c_tilde * one,
        obs_h=lambda t: one,
        obs_gamma=lambda t: SQRT2 * one,
        lip_b=2.0,
        lip_c=0.0,
        c_sup=1.0,
    )


def custom(params):
    """Constant-coefficient linear model from the matrices in scenario_params"""
    missing = [key for key in ('b', 'c', 'c_tilde', 'h', 'gamma') if key not in params]
    if missing:
        raise ModelValidationError(f"custom scenario is missing {', '.join(missing)}")
    return LinearModelSpec.from_matrices(
        b=params['b'],
        c=params['c'],
        c_tilde=params['c_tilde'],
        h=params['h'],
        gamma=params['gamma'],
        name=params.get('name', 'custom'),
    )


SCENARIOS = {
    'LIN1': lin1,
    'LIN2': lin2,
    'LINND': linnd,
    'NONLIN_SIN': nonlin_sin,
    'custom': custom,
}


def build_model(name, params=None):
    """Instantiate and validate a registered scenario"""
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise ModelValidationError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    model = factory(params or {})
    return model.validate(times=[0.0])
