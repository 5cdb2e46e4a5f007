from django.apps import AppConfig


class ContinuumConfig(AppConfig):
    name = 'continuum'
    verbose_name = "Pure-state limit equations"
