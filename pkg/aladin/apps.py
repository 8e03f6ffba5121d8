from django.apps import AppConfig


class AladinConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'aladin'
