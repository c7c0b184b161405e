"""
Decoding app configuration.

Typed action placeholders, parallel decoder and regression heads.
"""

from django.apps import AppConfig


class DecodingConfig(AppConfig):
    """Configuration for the decoding app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.decoding'
    verbose_name = 'Decoding'
