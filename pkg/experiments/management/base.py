# experiments/management/base.py
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone
from rest_framework import serializers

from filtering.exceptions import VALIDATION_ERRORS, NumericalError

from .. import writers
from ..models import ExperimentRun
from ..serializers import RunConfigSerializer
from ..services import ExperimentService, load_config

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VIOLATION = 3


class ExperimentCommand(BaseCommand):
    """
    Shared surface of the harness commands: read and validate the RunConfig,
    record the invocation, run the service and map the outcome to an exit code.
    """
    command_name = None

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to the JSON run configuration')
        parser.add_argument('--out', help='Output directory (overrides outputs.dir)')
        parser.add_argument('--seed', type=int, help='Base seed (overrides seeds.base_seed)')
        parser.add_argument('--threads', type=int, help='Worker threads (default: ENKBF_LAB_THREADS)')
        parser.add_argument('--strict', action='store_true', help='Exit with 3 on bound violations')

    def handle(self, *args, **options):
        run = ExperimentRun.objects.create(
            command=self.command_name,
            code_version=settings.LAB_CODE_VERSION,
        )
        try:
            config = self._validated_config(options)
            out_dir = self._output_dir(config, options)
            self._describe(run, config, out_dir)
            threads = options.get('threads') or settings.LAB_THREADS
            outcome = ExperimentService.run(self.command_name, config, out_dir, threads)
        except serializers.ValidationError as exc:
            self._finish(run, ExperimentRun.Status.INVALID, EXIT_VALIDATION, str(exc.detail))
            raise CommandError(f"Invalid configuration: {exc.detail}", returncode=EXIT_VALIDATION)
        except VALIDATION_ERRORS as exc:
            self._finish(run, ExperimentRun.Status.INVALID, EXIT_VALIDATION, str(exc))
            raise CommandError(str(exc), returncode=EXIT_VALIDATION)
        except NumericalError as exc:
            self._finish(run, ExperimentRun.Status.FAILED, EXIT_NUMERICAL, str(exc))
            raise CommandError(f"Numerical failure: {exc}", returncode=EXIT_NUMERICAL)
        except Exception as exc:
            logger.exception(f"{self.command_name} aborted: {str(exc)}")
            self._finish(run, ExperimentRun.Status.FAILED, EXIT_NUMERICAL, str(exc))
            raise

        strict = config['strict']
        if outcome.violations and strict:
            self._finish(run, ExperimentRun.Status.VIOLATED, EXIT_VIOLATION, f"{outcome.violations} bound violations")
            writers.write_manifest(run, outcome.results, out_dir)
            raise CommandError(f"{outcome.violations} bound violations", returncode=EXIT_VIOLATION)

        self._finish(run, ExperimentRun.Status.SUCCEEDED, 0, '')
        manifest = writers.write_manifest(run, outcome.results, out_dir)
        self.stdout.write(self.style.SUCCESS(f"{self.command_name} finished; manifest at {manifest}"))

    def _validated_config(self, options):
        raw = load_config(options['config'])
        if options.get('seed') is not None:
            raw.setdefault('seeds', {})['base_seed'] = options['seed']
        if options.get('out'):
            raw.setdefault('outputs', {})['dir'] = options['out']
        if options.get('strict'):
            raw['strict'] = True

        serializer = RunConfigSerializer(data=raw, context={'command': self.command_name})
        serializer.is_valid(raise_exception=True)
        config = serializer.validated_data
        config['raw'] = raw
        return config

    def _output_dir(self, config, options):
        directory = config['outputs'].get('dir')
        if directory:
            return Path(directory)
        seed = config['seeds']['base_seed']
        return Path(settings.LAB_OUTPUT_DIR) / f"{self.command_name}-{config.get('scenario', 'gain1d')}-{seed}"

    def _describe(self, run, config, out_dir):
        run.scenario = config.get('scenario', '')
        run.config = config['raw']
        run.base_seed = config['seeds']['base_seed']
        if 'grid' in config:
            run.t_end = config['grid']['t_end']
            run.n_steps = config['grid']['n_steps']
        run.output_dir = str(out_dir)
        run.save()

    def _finish(self, run, status, exit_code, message):
        run.status = status
        run.exit_code = exit_code
        run.message = message
        run.finished_at = timezone.now()
        run.save()
        logger.info(f"Run {run.pk} ({run.command}) finished with status {status}")
