"""
Scenes app configuration.

Synthetic manipulation episodes and their on-disk dataset format.
"""

from django.apps import AppConfig


class ScenesConfig(AppConfig):
    """Configuration for the scenes app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.scenes'
    verbose_name = 'Scenes'
