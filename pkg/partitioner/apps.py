from django.apps import AppConfig


class PartitionerConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'partitioner'
