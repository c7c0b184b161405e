"""
Encoders app configuration.

Semantic and spatial toy towers plus the instruction embedder.
"""

from django.apps import AppConfig


class EncodersConfig(AppConfig):
    """Configuration for the encoders app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.encoders'
    verbose_name = 'Encoders'
