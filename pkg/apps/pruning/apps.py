"""
Pruning app configuration.

Instruction-driven and spatial-aggregation visual token pruners.
"""

from django.apps import AppConfig


class PruningConfig(AppConfig):
    """Configuration for the pruning app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.pruning'
    verbose_name = 'Pruning'
