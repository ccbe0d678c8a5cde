from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Evaluate the consistent gain, its correlated translation and the correction drift on a 1-D grid'
    command_name = 'gain1d'
