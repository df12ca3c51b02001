import logging

from avrag.dataio import FORMAT_LOADERS, validate_file
from magnet_app.management.base import MagnetCommand

logger = logging.getLogger(__name__)


class Command(MagnetCommand):
    help = 'Check that a file parses and satisfies every schema invariant'
    record_name = 'validate'

    def add_arguments(self, parser):
        parser.add_argument('path', help='File (or transcript) to check')
        parser.add_argument('--kind', required=True, choices=sorted(FORMAT_LOADERS), help='File format')
        self.add_output_arguments(parser)

    def run_command(self, **options):
        count = validate_file(options['kind'], options['path'])
        logger.info(f"{options['path']} is a valid {options['kind']} file ({count} record(s))")
        report = {'command': 'validate', 'kind': options['kind'], 'records': count, 'valid': True}
        self.emit(report, options, summary={'records': count})
