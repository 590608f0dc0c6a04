from django.apps import AppConfig


class PerfmodelConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'perfmodel'
    verbose_name = 'Performance Model'
