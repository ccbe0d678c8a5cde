from experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Tabulate ensemble vs Kalman-Bucy moment errors over ensemble sizes and seeds'
    command_name = 'consistency'
