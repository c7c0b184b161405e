"""
Celery configuration and app initialization.

Ablation rows are the only background work. Tasks are discovered from
the `tasks` module of each installed app.

Usage:
    from config.celery_app import app

    @app.task
    def my_task():
        pass

    # worker for the sweep queue
    celery -A config.celery_app worker -Q ablation --concurrency 4

Reference: https://docs.celeryproject.io/en/stable/django/
"""

import os

from celery import Celery

# Set the default Django settings module
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings.development')

# Create Celery app
app = Celery('svla')

# Load configuration from Django settings
# Uses all settings with 'CELERY_' prefix
app.config_from_object('django.conf:settings', namespace='CELERY')

# Auto-discover tasks from all installed apps
app.autodiscover_tasks()

# Task routing: direct tasks to specific queues
app.conf.task_routes = {
    'apps.harness.tasks.*': {'queue': 'ablation'},
}
