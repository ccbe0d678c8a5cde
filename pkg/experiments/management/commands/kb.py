from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Integrate the Kalman-Bucy mean and Riccati covariance and check them against the a-priori bounds'
    command_name = 'kb'
