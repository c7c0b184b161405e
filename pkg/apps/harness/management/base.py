"""
Shared behaviour of the svla management commands.

- shared flags: --config PATH, --set KEY=VALUE (repeatable), --seed U64, --out PATH
- exit codes: 0 success, 1 usage or configuration error, 2 runtime error
- the Prometheus registry is exported at exit when METRICS_EXPORT_PATH is set

Subclasses implement `run(cfg, **options)` instead of `handle()`.
"""

import logging
import sys

from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import BaseAppException, ConfigurationError
from apps.harness.config import RunConfig, apply_overrides, build_run_config, load_run_config
from apps.harness.training import checkpoint_config, load_checkpoint
from apps.monitoring.metrics import export_metrics

logger = logging.getLogger(__name__)

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class SvlaCommand(BaseCommand):
    """Base class for pipeline commands."""

    # No models, no checks
    requires_system_checks = []
    requires_migrations_checks = False

    out_flags = ('--out',)
    out_help = 'Output path'
    out_required = True

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argparse errors become CommandError (exit 1) instead of SystemExit(2)
        parser.called_from_command_line = False
        return parser

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except CommandError as exc:
            self.stderr.write(f'{exc.__class__.__name__}: {exc}')
            sys.exit(exc.returncode)

    def add_arguments(self, parser):
        parser.add_argument('--config', default=None, help='Run config file (key = value lines)')
        parser.add_argument(
            '--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
            help='Override one config key (repeatable)',
        )
        parser.add_argument('--seed', type=int, default=None, help='Override the config seed')
        parser.add_argument(*self.out_flags, dest='out', required=self.out_required, help=self.out_help)

    def load_config(self, options) -> RunConfig:
        return load_run_config(options['config'], options['overrides'], options['seed'])

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except ConfigurationError as exc:
            logger.error('Configuration error', extra={'command': self.command_name(), 'error': exc.message})
            raise CommandError(exc.message, returncode=USAGE_EXIT) from exc
        except (BaseAppException, OSError) as exc:
            message = getattr(exc, 'message', None) or str(exc)
            logger.error('Command failed', extra={'command': self.command_name(), 'error': message})
            raise CommandError(message, returncode=RUNTIME_EXIT) from exc
        finally:
            export_metrics()

    def run(self, **options):
        raise NotImplementedError('subclasses of SvlaCommand must provide a run() method')

    def command_name(self) -> str:
        return self.__class__.__module__.rsplit('.', 1)[-1]

    def summary(self, message: str) -> None:
        self.stdout.write(message)


class CheckpointCommand(SvlaCommand):
    """
    Commands that rebuild a model from --checkpoint.

    The model is built from the config stored in the checkpoint. An explicit
    --config replaces it; --set and --seed without --config override it.
    """

    out_required = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--checkpoint', required=True, help='Checkpoint written by train')

    def load_model(self, options):
        path = options['checkpoint']
        explicit = None
        if options['config']:
            explicit = self.load_config(options)
        elif options['overrides'] or options['seed'] is not None:
            stored = checkpoint_config(path).to_mapping()
            explicit = build_run_config(apply_overrides(stored, options['overrides'], options['seed']))
        return load_checkpoint(path, explicit)
