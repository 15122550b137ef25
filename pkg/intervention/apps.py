from django.apps import AppConfig


class InterventionConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'intervention'
