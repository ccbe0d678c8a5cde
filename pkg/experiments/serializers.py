# experiments/serializers.py
import numpy as np
from rest_framework import serializers

from filtering.exceptions import FilteringError
from filtering.matrix_kit import MoorePenrose, Regularized
from filtering.noise import MAX_SEED
from filtering.sde_sim import GaussianInitial, TimeGrid
from filtering.variants import FilterKind, FilterVariant

from .models import ExperimentRun
from .scenarios import SCENARIOS


class GridSerializer(serializers.Serializer):
    t_end = serializers.FloatField()
    n_steps = serializers.IntegerField(min_value=1)

    def validate_t_end(self, value):
        if not value > 0.0:
            raise serializers.ValidationError("t_end must be positive")
        return value


class InverseSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=['moore_penrose', 'regularized'], default='moore_penrose')
    rel_tol = serializers.FloatField(required=False)
    epsilon = serializers.FloatField(required=False)
    n = serializers.IntegerField(min_value=1, default=1)

    def validate(self, attrs):
        if attrs['kind'] == 'regularized' and 'epsilon' not in attrs:
            raise serializers.ValidationError("regularized inverse needs epsilon")
        try:
            self.to_strategy(attrs)
        except FilteringError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    @staticmethod
    def to_strategy(attrs):
        if attrs['kind'] == 'regularized':
            return Regularized(epsilon=attrs['epsilon'], n=attrs['n'])
        if 'rel_tol' not in attrs:
            return None
        return MoorePenrose(rel_tol=attrs['rel_tol'])


class FilterSerializer(serializers.Serializer):
    variant = serializers.ChoiceField(
        choices=[kind.value for kind in FilterKind], default=FilterKind.DETERMINISTIC_CORRELATED.value
    )
    M = serializers.IntegerField(min_value=2)
    inverse = InverseSerializer(required=False)


class SeedsSerializer(serializers.Serializer):
    base_seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, default=0)
    n_seeds = serializers.IntegerField(min_value=1, default=1)


class OutputsSerializer(serializers.Serializer):
    dir = serializers.CharField(required=False, allow_blank=False)
    dump_particles_every = serializers.IntegerField(min_value=0, default=0)


class InitialSerializer(serializers.Serializer):
    """Initial law N(mean, cov); scalars are accepted for one-dimensional models"""
    mean = serializers.JSONField()
    cov = serializers.JSONField()

    def validate(self, attrs):
        try:
            GaussianInitial(mean=np.asarray(attrs['mean'], dtype=float), cov=np.asarray(attrs['cov'], dtype=float))
        except (FilteringError, TypeError, ValueError) as exc:
            raise serializers.ValidationError(f"invalid initial law: {exc}")
        return attrs


class SweepSerializer(serializers.Serializer):
    m_list = serializers.ListField(child=serializers.IntegerField(min_value=2), min_length=1)
    m_ref_factor = serializers.IntegerField(min_value=1, default=8)
    mode = serializers.ChoiceField(choices=['coupled', 'self_convergence'], default='coupled')


class Gain1DSerializer(serializers.Serializer):
    mean = serializers.FloatField(default=0.0)
    var = serializers.FloatField(default=1.0)
    x_min = serializers.FloatField(default=-6.0)
    x_max = serializers.FloatField(default=6.0)
    n_pts = serializers.IntegerField(min_value=3, default=1201)
    h = serializers.ChoiceField(choices=['linear', 'sin', 'cubic'], default='linear')
    r = serializers.FloatField(default=1.0)
    c_tilde = serializers.FloatField(default=0.0)

    def validate(self, attrs):
        if not attrs['var'] > 0.0:
            raise serializers.ValidationError("var must be positive")
        if not attrs['r'] > 0.0:
            raise serializers.ValidationError("r must be positive")
        if not attrs['x_min'] < attrs['x_max']:
            raise serializers.ValidationError("x_min must be smaller than x_max")
        return attrs


class RunConfigSerializer(serializers.Serializer):
    """The JSON run configuration shared by every harness command"""
    scenario = serializers.ChoiceField(choices=list(SCENARIOS), required=False)
    scenario_params = serializers.DictField(default=dict)
    initial = InitialSerializer(required=False)
    grid = GridSerializer(required=False)
    filter = FilterSerializer(required=False)
    seeds = SeedsSerializer(required=False)
    outputs = OutputsSerializer(required=False)
    strict = serializers.BooleanField(default=False)
    sweep = SweepSerializer(required=False)
    gain1d = Gain1DSerializer(required=False)

    # Sections each command cannot run without
    REQUIRED_SECTIONS = {
        'simulate': ('scenario', 'grid'),
        'kb': ('scenario', 'grid'),
        'filter': ('scenario', 'grid', 'filter'),
        'consistency': ('scenario', 'grid', 'sweep'),
        'poc': ('scenario', 'grid', 'sweep'),
        'gain1d': (),
        'bounds': ('scenario', 'grid', 'filter'),
    }

    def validate(self, attrs):
        command = self.context.get('command')
        missing = [name for name in self.REQUIRED_SECTIONS.get(command, ()) if name not in attrs]
        if missing:
            raise serializers.ValidationError(f"{command} needs the section(s): {', '.join(missing)}")
        attrs.setdefault('seeds', {'base_seed': 0, 'n_seeds': 1})
        attrs.setdefault('outputs', {'dump_particles_every': 0})
        return attrs

    @staticmethod
    def grid_of(config):
        return TimeGrid(t_end=config['grid']['t_end'], n_steps=config['grid']['n_steps'])

    @staticmethod
    def variant_of(config):
        section = config.get('filter', {})
        tag = FilterKind(section.get('variant', FilterKind.DETERMINISTIC_CORRELATED.value))
        inverse = section.get('inverse')
        return FilterVariant(tag=tag, inverse=InverseSerializer.to_strategy(inverse) if inverse else None)

    @staticmethod
    def initial_of(config, d_x):
        section = config.get('initial')
        if section is None:
            return GaussianInitial(mean=np.zeros(d_x), cov=np.eye(d_x))
        return GaussianInitial(mean=np.asarray(section['mean'], dtype=float), cov=np.asarray(section['cov'], dtype=float))


class ExperimentRunSerializer(serializers.ModelSerializer):
    """Manifest view of a run: everything needed to reproduce its outputs"""
    class Meta:
        model = ExperimentRun
        fields = [
            'command',
            'scenario',
            'config',
            'base_seed',
            't_end',
            'n_steps',
            'code_version',
            'output_dir',
            'status',
            'exit_code',
        ]
