import logging

from avrag.config import DEFAULTS
from avrag.dataio import append_ranking, load_index, load_query_embedding
from avrag.retrieval import score_videos, top_k
from magnet_app.management.base import MagnetCommand

logger = logging.getLogger(__name__)


class Command(MagnetCommand):
    help = 'Rank indexed videos against a query embedding and keep the top k'
    record_name = 'retrieve'

    def add_arguments(self, parser):
        parser.add_argument('--index', required=True, help='Retrieval index (JSON)')
        parser.add_argument('--query-embedding', required=True, help='Query embedding (JSON)')
        parser.add_argument('--topk', type=int, default=DEFAULTS.k, help='Videos to keep')
        parser.add_argument('--rankings-out', default=None, help='Append the full ranking to this rankings JSONL file')
        parser.add_argument('--query-id', default=None, help='Query id written with --rankings-out')
        self.add_output_arguments(parser)

    def run_command(self, **options):
        if options['rankings_out'] and not options['query_id']:
            raise self.usage_error("--rankings-out needs --query-id")
        index = load_index(options['index'])
        query = load_query_embedding(options['query_embedding'])
        topk = options['topk']
        if topk < 1 or topk > len(index):
            raise self.usage_error(f"--topk must lie in 1..{len(index)}, got {topk}")

        table = score_videos(query, index)
        selected = top_k(table, topk)
        report = {
            'command': 'retrieve',
            'topk': topk,
            'indexed_videos': len(index),
            'results': [
                {
                    'rank': rank,
                    'video_id': video_id,
                    's_av': table.scores[video_id].s_av,
                    's_cap': table.scores[video_id].s_cap,
                    'sim_avg': table.scores[video_id].sim_avg,
                }
                for rank, video_id in enumerate(selected, 1)
            ],
        }
        if options['rankings_out']:
            append_ranking(options['rankings_out'], options['query_id'], table.ranking)
            logger.info(f"Appended ranking for {options['query_id']} to {options['rankings_out']}")
        self.emit(report, options, summary={'retrieved': selected})
