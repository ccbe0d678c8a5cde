from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Propagation-of-chaos sweep (coupled mean-field copies, or self-convergence surrogate)'
    command_name = 'poc'
