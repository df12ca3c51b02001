from django.apps import AppConfig


class MagnetAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'magnet_app'
    verbose_name = 'Grounded AV-QA evaluation'
