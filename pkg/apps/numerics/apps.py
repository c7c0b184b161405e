"""
Numerics app configuration.

Reverse-mode tensor engine, seeded generator, parameter modules and optimizer.
"""

from django.apps import AppConfig


class NumericsConfig(AppConfig):
    """Configuration for the numerics app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.numerics'
    verbose_name = 'Numerics'
