"""
`svla` console entry point.

    svla gen-data|train|eval|bench|ablate|dump-attn [options]

Each subcommand is the Django management command of the same name with
dashes turned into underscores, so `svla dump-attn ...` and
`python manage.py dump_attn ...` are the same thing.
"""

import os
import sys

SUBCOMMANDS = ('gen-data', 'train', 'eval', 'bench', 'ablate', 'dump-attn')

# Single-threaded BLAS so timings and reductions do not depend on the core count.
# Must be set before numpy is first imported.
THREAD_VARIABLES = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS', 'NUMEXPR_NUM_THREADS')


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    for name in THREAD_VARIABLES:
        os.environ.setdefault(name, '1')
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings.development')

    from django.core.management import execute_from_command_line

    if len(argv) > 1 and argv[1] in SUBCOMMANDS:
        argv[1] = argv[1].replace('-', '_')
    argv[0] = 'svla'
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()
