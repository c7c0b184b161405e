"""
Settings for the svla commands.

DJANGO_SETTINGS_MODULE picks the layer:
  - config.settings.development (default; Celery tasks run eagerly)
  - config.settings.production (ablation rows go to the broker, Sentry on)

Example:
    export DJANGO_SETTINGS_MODULE=config.settings.production
    svla ablate --config configs/toy.cfg --out runs/ablation.csv
"""
