import logging

from avrag.agents import mock_transcript_agent, run_pipeline
from avrag.config import DEFAULTS
from avrag.dataio import load_contexts, load_index, load_query_embedding, qa_record_to_dict
from magnet_app.management.base import MagnetCommand, add_subcommand

logger = logging.getLogger(__name__)


class Command(MagnetCommand):
    help = 'Run the retrieval + per-video agent + meta-aggregation pipeline for one query'
    record_name = 'pipeline_run'

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='action', required=True, metavar='{run}')
        run = add_subcommand(subparsers, parser, 'run', 'Answer one query with grounded steps')
        run.add_argument('--index', required=True, help='Retrieval index (JSON)')
        run.add_argument('--contexts', required=True, help='Directory of transcript files, one per video')
        run.add_argument('--query', required=True, help='Question text')
        run.add_argument('--query-embedding', required=True, help='Query embedding (JSON)')
        run.add_argument('--id', default='query', help='Record id of the emitted prediction')
        run.add_argument('--k', type=int, default=DEFAULTS.k, help='Videos retrieved and handed to agents')
        run.add_argument('--dedupe-iou', type=float, default=DEFAULTS.dedupe_iou, help='Same-video window IoU above which the weaker window is dropped')
        run.add_argument('--agent-threshold', type=float, default=DEFAULTS.agent_threshold, help='Minimum segment score for a window')
        run.add_argument('--agent-max-windows', type=int, default=DEFAULTS.agent_max_windows, help='Windows per video')
        run.add_argument('--workers', type=int, default=DEFAULTS.workers, help='Agents run concurrently')
        self.add_embedder_argument(run)
        self.add_output_arguments(run, default_format='jsonl')

    def run_command(self, **options):
        k = options['k']
        if not 0.0 <= options['dedupe_iou'] <= 1.0:
            raise self.usage_error(f"--dedupe-iou must lie in [0, 1], got {options['dedupe_iou']}")
        if not 0.0 <= options['agent_threshold'] <= 1.0:
            raise self.usage_error(f"--agent-threshold must lie in [0, 1], got {options['agent_threshold']}")
        if options['agent_max_windows'] < 1:
            raise self.usage_error(f"--agent-max-windows must be >= 1, got {options['agent_max_windows']}")
        if options['workers'] < 1:
            raise self.usage_error(f"--workers must be >= 1, got {options['workers']}")

        index = load_index(options['index'])
        if k < 1 or k > len(index):
            raise self.usage_error(f"--k must lie in 1..{len(index)}, got {k}")
        contexts = load_contexts(options['contexts'])
        query_embedding = load_query_embedding(options['query_embedding'])
        embedder, _ = self.build_embedder(options)
        agent = mock_transcript_agent(
            embedder,
            score_threshold=options['agent_threshold'],
            max_windows=options['agent_max_windows'],
        )
        logger.info(f"Spawning {k} agent(s) for query {options['id']}")
        answer = run_pipeline(
            options['query'],
            index,
            contexts,
            query_embedding,
            k,
            agent,
            dedupe_iou=options['dedupe_iou'],
            workers=options['workers'],
        )
        for failure in answer.failures:
            logger.warning(f"Agent failure on {failure.video_id}: {failure.message}")

        record = qa_record_to_dict(answer.to_qa_item(options['id'], options['query']))
        record['retrieved'] = list(answer.retrieved)
        record['failures'] = [{'video_id': f.video_id, 'message': f.message} for f in answer.failures]
        record['diagnostics'] = list(answer.diagnostics)
        self.emit(record, options, summary={'steps': len(answer.steps), 'failures': len(answer.failures)})
