from django.apps import AppConfig


class FormulationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'formulation'
