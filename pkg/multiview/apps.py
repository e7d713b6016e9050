from django.apps import AppConfig


class MultiviewConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'multiview'
    verbose_name = 'Multiview majority vote'
