# experiments/writers.py
"""
CSV and manifest emission. Every CSV has a header row and a fixed column
order; floats are written with full round-trip precision so that reruns
with the same manifest produce identical files.
"""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .serializers import ExperimentRunSerializer

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
MANIFEST_NAME = 'manifest.json'


def _vector_columns(prefix, dim):
    return [f"{prefix}_{i + 1}" for i in range(dim)]


def _matrix_columns(prefix, dim):
    return [f"{prefix}_{i + 1}{j + 1}" for i in range(dim) for j in range(dim)]


def _write(frame, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_truth(obs, path):
    """t, x_*, dy_*; the first row carries dy = 0"""
    d_x = obs.truth_path.shape[1]
    d_y = obs.delta_y.shape[1]
    delta_y = np.vstack([np.zeros((1, d_y)), obs.delta_y])
    frame = pd.DataFrame(
        np.column_stack([obs.grid.times, obs.truth_path, delta_y]),
        columns=['t', *_vector_columns('x', d_x), *_vector_columns('dy', d_y)],
    )
    return _write(frame, path)


def write_kb(beliefs, path):
    """t, m_*, p_ij, lambda_min, trace"""
    d_x = beliefs[0].mean.size
    rows = [
        [b.t, *b.mean, *b.cov.ravel(), b.lambda_min, b.trace]
        for b in beliefs
    ]
    columns = ['t', *_vector_columns('m', d_x), *_matrix_columns('p', d_x), 'lambda_min', 'trace']
    return _write(pd.DataFrame(rows, columns=columns), path)


def write_filter(summaries, path):
    """t, xbar_*, p_ij, lambda_min, trace, singular_events"""
    d_x = summaries[0].mean.size
    rows = [
        [s.t, *s.mean, *s.cov.ravel(), s.lambda_min, s.trace, s.singular_events]
        for s in summaries
    ]
    columns = ['t', *_vector_columns('xbar', d_x), *_matrix_columns('p', d_x), 'lambda_min', 'trace', 'singular_events']
    frame = pd.DataFrame(rows, columns=columns)
    frame['singular_events'] = frame['singular_events'].astype(int)
    return _write(frame, path)


def write_particles(snapshots, path):
    """Long format: t, particle, x_*"""
    rows = []
    for t, particles in snapshots:
        for i, column in enumerate(particles.T):
            rows.append([t, i, *column])
    d_x = snapshots[0][1].shape[0]
    frame = pd.DataFrame(rows, columns=['t', 'particle', *_vector_columns('x', d_x)])
    return _write(frame, path)


def write_diagnostics(series, path):
    """t, trace_p, lambda_min_p, psi_bar, lambda_floor"""
    frame = pd.DataFrame({
        't': series.t,
        'trace_p': series.trace_p,
        'lambda_min_p': series.lambda_min_p,
        'psi_bar': np.full(series.t.size, series.psi_bar),
        'lambda_floor': series.lambda_floor,
    })
    return _write(frame, path)


def write_consistency(rows, path):
    frame = pd.DataFrame(
        [[r.m, r.mean_cov_err_t, r.stderr_cov_err_t, r.mean_mean_err_t, r.stderr_mean_err_t] for r in rows],
        columns=['M', 'mean_cov_err_T', 'stderr_cov_err_T', 'mean_mean_err_T', 'stderr_mean_err_T'],
    )
    return _write(frame, path)


def write_poc(rows, path):
    frame = pd.DataFrame(
        [[r.m, r.mean_err_t, r.stderr_t, r.mean_sup_err, r.stderr_sup] for r in rows],
        columns=['M', 'mean_err_T', 'stderr_T', 'mean_sup_err', 'stderr_sup'],
    )
    return _write(frame, path)


def write_gain1d(density, k0, k_corr, a, path):
    frame = pd.DataFrame({'x': density.x, 'eta': density.eta, 'k0': k0, 'k_corr': k_corr, 'a': a})
    return _write(frame, path)


def write_violations(report, path):
    frame = pd.DataFrame(
        [[v.step, v.kind, v.value, v.bound] for v in report],
        columns=['step', 'kind', 'value', 'bound'],
    )
    return _write(frame, path)


def write_manifest(run, results, directory):
    """Config echo, seed, grid and code version of `run`, plus command results"""
    path = Path(directory) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = dict(ExperimentRunSerializer(run).data)
    manifest['results'] = results
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=float)
    return path


def write_bounds(grid, psi_bar, lambda_floor, path):
    """t, psi_bar, lambda_floor"""
    frame = pd.DataFrame({
        't': grid.times,
        'psi_bar': np.full(grid.n_steps + 1, psi_bar),
        'lambda_floor': lambda_floor,
    })
    return _write(frame, path)
