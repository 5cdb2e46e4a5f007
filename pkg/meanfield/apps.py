from django.apps import AppConfig


class MeanfieldConfig(AppConfig):
    name = 'meanfield'
    verbose_name = "Mean-field limit"
