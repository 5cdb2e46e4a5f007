from django.apps import AppConfig


class ClustersConfig(AppConfig):
    name = 'clusters'
    verbose_name = "Cluster combinatorics"
