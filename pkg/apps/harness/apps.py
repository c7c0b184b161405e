"""
Harness app configuration.

Run configuration, training, evaluation and the command-line surface.
"""

from django.apps import AppConfig


class HarnessConfig(AppConfig):
    """Configuration for the harness app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.harness'
    verbose_name = 'Harness'
