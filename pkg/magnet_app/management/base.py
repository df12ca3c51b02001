"""
Shared plumbing for the toolkit's management commands: output flags, report
writing, optional run recording and the error-to-exit-code mapping
(1 for evaluation-data errors, 2 for usage errors).
"""
import argparse
import logging
from concurrent.futures import ThreadPoolExecutor

from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from avrag.config import DEFAULTS
from avrag.dataio import load_text_embeddings
from avrag.embedding import HASHED_BOW_VERSION, default_embedder
from avrag.exceptions import MagnetError
from evaluation.reports import REPORT_FORMATS, report_digest, write_report
from magnet_app.models import EvaluationRun

logger = logging.getLogger(__name__)

# options that describe how Django ran the command, not what was computed
_FRAMEWORK_OPTIONS = {
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color',
    'skip_checks', 'stdout', 'stderr', 'output', 'format', 'record',
}


def int_list(text):
    """argparse type for "1,3,5"."""
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(value < 1 for value in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def float_list(text):
    """argparse type for "0.3,0.5,0.7"."""
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def add_subcommand(subparsers, parent, name, help_text):
    """A subcommand parser that keeps Django's exit-code behaviour."""
    return subparsers.add_parser(
        name,
        help=help_text,
        description=help_text,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        called_from_command_line=parent.called_from_command_line,
    )


class MagnetCommand(BaseCommand):
    """Base for every toolkit command; subclasses implement run_command()."""

    record_name = None
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        kwargs.setdefault('formatter_class', argparse.ArgumentDefaultsHelpFormatter)
        return super().create_parser(prog_name, subcommand, **kwargs)

    @staticmethod
    def add_output_arguments(parser, default_format='json'):
        parser.add_argument('--output', default='-', help='Report path, "-" for stdout')
        parser.add_argument('--format', default=default_format, choices=REPORT_FORMATS, help='Report format')
        parser.add_argument('--record', action='store_true', help='Store this run in the project database')

    @staticmethod
    def add_evaluation_arguments(parser):
        parser.add_argument('--per-query', action='store_true', help='Include per-query breakdowns')
        parser.add_argument('--workers', type=int, default=DEFAULTS.workers, help='Threads for per-query evaluation')

    @staticmethod
    def add_embedder_argument(parser):
        parser.add_argument(
            '--text-embeddings',
            default=None,
            help='Precomputed text embedding file used instead of the hashed bag-of-words embedder',
        )

    def usage_error(self, message):
        logger.error(f"Usage error: {message}")
        return CommandError(message, returncode=2)

    def handle(self, *args, **options):
        try:
            self.run_command(**options)
        except MagnetError as e:
            logger.error(f"{self.record_name} failed: {e}")
            raise CommandError(str(e), returncode=1)

    def run_command(self, **options):
        raise NotImplementedError('subclasses of MagnetCommand must provide a run_command() method')

    def build_embedder(self, options):
        """(embedder, name) for the --text-embeddings choice."""
        if options.get('text_embeddings'):
            embedder = load_text_embeddings(options['text_embeddings'])
            return embedder, f"precomputed-d{embedder.dimension}"
        return default_embedder(), HASHED_BOW_VERSION

    def map_queries(self, func, items, workers):
        """Apply func to items in order, optionally on a thread pool."""
        if workers < 1:
            raise self.usage_error(f"--workers must be >= 1, got {workers}")
        if workers == 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(func, items))

    def emit(self, report, options, summary=None, record_name=None):
        """Write the report and, with --record, store the run."""
        text = write_report(report, options['output'], options['format'], stdout=self.stdout)
        if options.get('record'):
            self.record_run(record_name or self.record_name, options, summary or {}, report_digest(text))
        if options['output'] != '-' and options.get('verbosity', 1) >= 1:
            self.stdout.write(self.style.SUCCESS(f"Report written to {options['output']}"))
        return text

    def record_run(self, command, options, summary, digest):
        parameters = {
            key: list(value) if isinstance(value, tuple) else value
            for key, value in options.items()
            if key not in _FRAMEWORK_OPTIONS and isinstance(value, (str, int, float, bool, list, tuple, type(None)))
        }
        try:
            run = EvaluationRun.objects.create(
                command=command,
                parameters=parameters,
                summary=summary,
                report_sha256=digest,
            )
        except DatabaseError as e:
            logger.error(f"Could not record run: {e}")
            raise CommandError(f"cannot record the run ({e}); run `manage.py migrate` first", returncode=1)
        logger.info(f"Recorded {command} run #{run.pk}")
        return run
