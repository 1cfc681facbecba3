from django.apps import AppConfig


class CoreConfig(AppConfig):
    name = 'smartype.core'
    verbose_name = 'Answer type prediction'
