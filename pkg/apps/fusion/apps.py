"""
Fusion app configuration.

Dense and sparse dual-stream fusers and visual token set assembly.
"""

from django.apps import AppConfig


class FusionConfig(AppConfig):
    """Configuration for the fusion app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.fusion'
    verbose_name = 'Fusion'
