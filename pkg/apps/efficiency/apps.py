"""
Efficiency app configuration.

Analytic FLOPs model, token budgets and wall-clock benchmarks.
"""

from django.apps import AppConfig


class EfficiencyConfig(AppConfig):
    """Configuration for the efficiency app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.efficiency'
    verbose_name = 'Efficiency'
