from django.apps import AppConfig


class AdmmConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'admm'
