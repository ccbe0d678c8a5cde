# experiments/services.py
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rest_framework import serializers

from filtering import diagnostics, enkbf
from filtering.exceptions import ModelValidationError
from filtering.gain_field_1d import (
    DensityGrid1D,
    consistency_residual,
    correction_drift_a,
    gain_correlated,
    gain_k0,
)
from filtering.kalman_bucy import GaussianBelief, integrate_moments
from filtering.mean_field_coupling import poc_sweep, self_convergence_sweep
from filtering.model import LinearModelSpec, gamma, gamma_bar_m
from filtering.parallel import seed_map, seed_seq
from filtering.sde_sim import simulate_truth_and_obs

from . import writers
from .scenarios import build_model
from .serializers import Gain1DSerializer, RunConfigSerializer

logger = logging.getLogger(__name__)

OBSERVATION_FUNCTIONS = {
    'linear': lambda x: x,
    'sin': np.sin,
    'cubic': lambda x: x ** 3,
}


@dataclass
class CommandOutcome:
    """What a command produced: manifest results and bound violations"""
    results: dict = field(default_factory=dict)
    violations: int = 0


def _as_list(values):
    return np.asarray(values, dtype=float).tolist()


class ExperimentService:
    """One class method per harness command; each reads a validated RunConfig"""

    @classmethod
    def run(cls, command, config, out_dir, threads=1):
        handler = getattr(cls, f"run_{command}")
        logger.info(f"Starting {command} on {config.get('scenario', '-')} into {out_dir}")
        outcome = handler(config, Path(out_dir), threads)
        logger.info(f"Finished {command}: {outcome.violations} bound violations")
        return outcome

    # Helpers

    @staticmethod
    def _model(config):
        return build_model(config['scenario'], config.get('scenario_params'))

    @staticmethod
    def _linear_model(config):
        model = ExperimentService._model(config)
        if not isinstance(model, LinearModelSpec):
            raise ModelValidationError(f"{model.name}: this command needs a linear-Gaussian scenario")
        return model

    @staticmethod
    def _seed(config):
        return config['seeds']['base_seed']

    @staticmethod
    def _report(model, grid, series_records, out_dir, name):
        """Trace/floor check of a mean-field covariance series, written next to the outputs"""
        series = diagnostics.build_series(
            model,
            grid,
            trace_p=[r.trace for r in series_records],
            lambda_min_p=[r.lambda_min for r in series_records],
        )
        report = diagnostics.check_run(series_records, series)
        writers.write_diagnostics(series, out_dir / f"{name}_diagnostics.csv")
        writers.write_violations(report, out_dir / 'violations.csv')
        return series, report

    # Commands

    @classmethod
    def run_simulate(cls, config, out_dir, threads):
        model = cls._model(config)
        grid = RunConfigSerializer.grid_of(config)
        initial = RunConfigSerializer.initial_of(config, model.d_x)
        obs = simulate_truth_and_obs(model, grid, initial, cls._seed(config))
        writers.write_truth(obs, out_dir / 'truth.csv')
        return CommandOutcome(results={'x_T': _as_list(obs.truth_path[-1]), 'y_T': _as_list(obs.y_path()[-1])})

    @classmethod
    def run_kb(cls, config, out_dir, threads):
        model = cls._linear_model(config)
        grid = RunConfigSerializer.grid_of(config)
        initial = RunConfigSerializer.initial_of(config, model.d_x)
        variant = RunConfigSerializer.variant_of(config)
        obs = simulate_truth_and_obs(model, grid, initial, cls._seed(config))
        beliefs = integrate_moments(model, obs, GaussianBelief(0.0, initial.mean, initial.cov), variant.tag)
        writers.write_kb(beliefs, out_dir / 'kb.csv')

        series, report = cls._report(model, grid, beliefs, out_dir, 'kb')
        final = beliefs[-1]
        return CommandOutcome(
            results={
                'p_T': _as_list(final.cov),
                'm_T': _as_list(final.mean),
                'psi_bar': series.psi_bar,
                'floor_clipped': series.floor_clipped,
                'violations': len(report),
            },
            violations=len(report),
        )

    @classmethod
    def run_filter(cls, config, out_dir, threads):
        model = cls._model(config)
        grid = RunConfigSerializer.grid_of(config)
        initial = RunConfigSerializer.initial_of(config, model.d_x)
        variant = RunConfigSerializer.variant_of(config)
        m = config['filter']['M']
        dump_every = config['outputs'].get('dump_particles_every', 0)
        seeds = seed_seq(cls._seed(config), config['seeds']['n_seeds'])

        def job(seed):
            obs = simulate_truth_and_obs(model, grid, initial, seed)
            return enkbf.run_filter(model, obs, m, variant, seed=seed, initial=initial, dump_every=dump_every)

        runs = seed_map(job, seeds, threads)
        for seed, run in zip(seeds, runs):
            suffix = '' if len(seeds) == 1 else f"_seed{seed}"
            writers.write_filter(run.summaries, out_dir / f"filter{suffix}.csv")
            if run.snapshots:
                writers.write_particles(run.snapshots, out_dir / f"particles{suffix}.csv")

        first = runs[0].diagnostics
        writers.write_diagnostics(first, out_dir / 'filter_diagnostics.csv')
        psi_bar = diagnostics.trace_bound(model, grid, float(np.trace(initial.cov)))
        check = diagnostics.check_ensemble_trace([run.diagnostics.trace_p for run in runs], psi_bar)
        report = diagnostics.ViolationReport()
        if not check.holds:
            report.violations.append(diagnostics.Violation(grid.n_steps, 'trace', check.mean_sup_trace, check.psi_bar))
        writers.write_violations(report, out_dir / 'violations.csv')

        return CommandOutcome(
            results={
                'M': m,
                'variant': variant.tag.value,
                'gamma_bar_m': first.gamma_bar_m,
                'psi_bar': psi_bar,
                'mean_sup_trace': check.mean_sup_trace,
                'stderr_sup_trace': check.stderr,
                'singular_events': sum(run.diagnostics.singular_events for run in runs),
            },
            violations=len(report),
        )

    @classmethod
    def run_consistency(cls, config, out_dir, threads):
        model = cls._linear_model(config)
        grid = RunConfigSerializer.grid_of(config)
        rows = enkbf.consistency_sweep(
            model,
            config['sweep']['m_list'],
            config['seeds']['n_seeds'],
            grid,
            base_seed=cls._seed(config),
            initial=RunConfigSerializer.initial_of(config, model.d_x),
            variant=RunConfigSerializer.variant_of(config),
            threads=threads,
        )
        writers.write_consistency(rows, out_dir / 'consistency.csv')
        return CommandOutcome(results={'mean_cov_err_T': {str(r.m): r.mean_cov_err_t for r in rows}})

    @classmethod
    def run_poc(cls, config, out_dir, threads):
        sweep = config['sweep']
        model = cls._model(config)
        grid = RunConfigSerializer.grid_of(config)
        options = dict(
            base_seed=cls._seed(config),
            initial=RunConfigSerializer.initial_of(config, model.d_x),
            variant=RunConfigSerializer.variant_of(config),
            threads=threads,
        )
        if sweep['mode'] == 'self_convergence':
            rows = self_convergence_sweep(
                model, sweep['m_list'], config['seeds']['n_seeds'], grid,
                m_ref_factor=sweep['m_ref_factor'], **options
            )
            label = 'surrogate'
        else:
            rows = poc_sweep(model, sweep['m_list'], config['seeds']['n_seeds'], grid, **options)
            label = 'coupled'
        writers.write_poc(rows, out_dir / 'poc.csv')
        return CommandOutcome(results={'mode': label, 'mean_err_T': {str(r.m): r.mean_err_t for r in rows}})

    @classmethod
    def run_gain1d(cls, config, out_dir, threads):
        section = config.get('gain1d')
        if section is None:
            defaults = Gain1DSerializer(data={})
            defaults.is_valid(raise_exception=True)
            section = defaults.validated_data
        h = OBSERVATION_FUNCTIONS[section['h']]
        r = section['r']
        c_tilde = section['c_tilde']
        density = DensityGrid1D.gaussian(
            mean=section['mean'], var=section['var'],
            x_min=section['x_min'], x_max=section['x_max'], n_pts=section['n_pts'],
        )
        k0 = gain_k0(density, h, r)
        k_corr = gain_correlated(k0, c_tilde, r)
        a = correction_drift_a(density, k_corr, h, r, c_tilde)
        writers.write_gain1d(density, k0, k_corr, a, out_dir / 'gain1d.csv')
        residual = consistency_residual(density, k0, h, r, interior=density.valid_mask())
        return CommandOutcome(results={'consistency_residual': residual})

    @classmethod
    def run_bounds(cls, config, out_dir, threads):
        model = cls._model(config)
        grid = RunConfigSerializer.grid_of(config)
        initial = RunConfigSerializer.initial_of(config, model.d_x)
        m = config['filter']['M']

        lam0 = np.linalg.eigvalsh(initial.cov)
        psi_bar = diagnostics.trace_bound(model, grid, float(np.sum(lam0)))
        floor = diagnostics.lambda_lower_ode(model, grid, psi_bar, max(float(lam0[0]), 0.0) / 2.0)
        margin = gamma_bar_m(model, m, grid)
        if margin <= 0.0:
            logger.warning(f"{model.name}: gamma_bar_M = {margin:.4f} <= 0 for M={m}")

        writers.write_bounds(grid, psi_bar, floor.values, out_dir / 'bounds.csv')
        return CommandOutcome(results={
            'M': m,
            'psi_bar': psi_bar,
            'gamma_bar_m': margin,
            'inf_gamma': min(gamma(model, t) for t in grid.times),
            'lambda_floor_T': float(floor.values[-1]),
            'floor_clipped': floor.clipped,
        })


def load_config(path):
    """Parse a RunConfig file; malformed JSON surfaces as a validation error"""
    try:
        with open(path, encoding='utf-8') as f:
            raw = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise serializers.ValidationError(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise serializers.ValidationError("config must be a single JSON object")
    return raw
