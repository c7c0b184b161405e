"""
Django settings for development environment.

Extends base.py with development-specific overrides:
  - Debug mode enabled
  - Verbose logging
  - Celery tasks run eagerly in-process (no broker needed)
"""

from .base import *  # noqa: F401, F403

# Development: enable debug mode
DEBUG = os.getenv('DEBUG', 'True') == 'True'
ALLOWED_HOSTS = ['localhost', '127.0.0.1']

# Logging: More verbose in development
LOGGING['handlers']['console']['level'] = os.getenv('LOG_LEVEL', 'DEBUG')
LOGGING['loggers']['apps']['level'] = os.getenv('LOG_LEVEL', 'DEBUG')

# Celery: Use eager task execution in development for synchronous runs
CELERY_TASK_ALWAYS_EAGER = os.getenv('CELERY_TASK_ALWAYS_EAGER', 'True') == 'True'
CELERY_TASK_EAGER_PROPAGATES = True

# Sentry: Disabled in development
SENTRY_DSN = ''
