# experiments/models.py
from django.db import models


class ExperimentRun(models.Model):
    """
    One invocation of a harness command: what was asked for and how it ended
    """

    class Command(models.TextChoices):
        SIMULATE = 'simulate', 'Truth and observations'
        KB = 'kb', 'Kalman-Bucy reference'
        FILTER = 'filter', 'Ensemble filter run'
        CONSISTENCY = 'consistency', 'Ensemble vs Kalman-Bucy sweep'
        POC = 'poc', 'Propagation of chaos sweep'
        GAIN1D = 'gain1d', '1-D gain fields'
        BOUNDS = 'bounds', 'A-priori bounds'

    class Status(models.TextChoices):
        RUNNING = 'running', 'Running'
        SUCCEEDED = 'succeeded', 'Succeeded'
        INVALID = 'invalid', 'Validation error'
        FAILED = 'failed', 'Numerical failure'
        VIOLATED = 'violated', 'Bound violation'

    command = models.CharField(max_length=20, choices=Command.choices)
    scenario = models.CharField(max_length=50, blank=True)
    config = models.JSONField(default=dict)
    base_seed = models.BigIntegerField(default=0)
    t_end = models.FloatField(null=True, blank=True)
    n_steps = models.PositiveIntegerField(null=True, blank=True)
    code_version = models.CharField(max_length=20)
    output_dir = models.CharField(max_length=500, blank=True)
    status = models.CharField(max_length=20, choices=Status.choices, default=Status.RUNNING)
    exit_code = models.SmallIntegerField(null=True, blank=True)
    message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['command', 'scenario'], name='experiments_cmd_scen_idx'),
        ]

    def __str__(self):
        return f"{self.command} {self.scenario} (seed {self.base_seed}): {self.status}"
