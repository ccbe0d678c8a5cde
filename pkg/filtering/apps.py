from django.apps import AppConfig


class FilteringConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'filtering'
    verbose_name = 'Ensemble Kalman-Bucy filtering'
