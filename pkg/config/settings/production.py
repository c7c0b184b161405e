"""
Django settings for production environment.

Extends base.py with production-specific overrides:
  - Debug mode disabled
  - Minimal logging (only warnings/errors)
  - Ablation rows dispatched to Celery workers on the `ablation` queue
  - Sentry error tracking enabled
"""

import sentry_sdk
from sentry_sdk.integrations.celery import CeleryIntegration
from sentry_sdk.integrations.django import DjangoIntegration

from .base import *  # noqa: F401, F403

# Production: Disable debug
DEBUG = False
ALLOWED_HOSTS = []

if SECRET_KEY == 'svla-insecure-local-key':
    raise ValueError('SECRET_KEY environment variable not set.')

# Logging: Only warnings and errors in production
LOGGING['handlers']['console']['level'] = os.getenv('LOG_LEVEL', 'WARNING')
LOGGING['loggers']['django']['level'] = os.getenv('LOG_LEVEL', 'WARNING')
LOGGING['loggers']['apps']['level'] = os.getenv('LOG_LEVEL', 'WARNING')

# Celery: Async task execution in production
CELERY_TASK_ALWAYS_EAGER = False
CELERY_TASK_EAGER_PROPAGATES = False

# Sentry error tracking
SENTRY_DSN = os.getenv('SENTRY_DSN', '')
if SENTRY_DSN:
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        integrations=[
            DjangoIntegration(),
            CeleryIntegration(),
        ],
        traces_sample_rate=float(os.getenv('SENTRY_TRACE_SAMPLE_RATE', 0.1)),
        send_default_pii=False,
        environment=os.getenv('ENVIRONMENT', 'production'),
    )
