from django.apps import AppConfig


class TensorcoreConfig(AppConfig):
    name = 'tensorcore'
    verbose_name = "Labeled operator algebra"
