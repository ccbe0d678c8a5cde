from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Simulate a truth path and its observation increments (truth.csv)'
    command_name = 'simulate'
