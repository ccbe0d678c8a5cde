from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Report the covariance trace bound, eigenvalue floor and ensemble well-posedness margin'
    command_name = 'bounds'
