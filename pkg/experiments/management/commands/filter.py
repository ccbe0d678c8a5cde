from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Run the ensemble Kalman-Bucy filter on one or more seeded twin experiments'
    command_name = 'filter'
