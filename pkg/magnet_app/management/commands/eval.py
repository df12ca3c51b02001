import logging

from avrag.config import DEFAULTS
from avrag.core import QAItem
from avrag.dataio import load_dataset, load_qrels, load_rankings
from avrag.exceptions import EvaluationError
from avrag.retrieval import RECALL_DENOMINATORS, mean_recall, recall_at_k
from evaluation.mtgs import collect_groundings, iou_threshold_rates, mtgs_avg, mtgs_per_query
from evaluation.stem import stem_aggregate, stem_evaluate
from evaluation.text_metrics import CIDER_VARIANTS, evaluate_alignment
from magnet_app.management.base import MagnetCommand, add_subcommand, float_list, int_list

logger = logging.getLogger(__name__)


def _threshold_key(value: float) -> str:
    return f"{value:.2f}"


class Command(MagnetCommand):
    help = 'Evaluate predictions: StEM, MTGS, retrieval recall@k or text alignment'
    record_name = 'eval'

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='metric', required=True, metavar='{stem,mtgs,retrieval,text}')

        stem = add_subcommand(subparsers, parser, 'stem', 'Step-wise error metric over a prediction file')
        stem.add_argument('--gt', required=True, help='Ground-truth dataset (JSONL)')
        stem.add_argument('--pred', required=True, help='Prediction file (JSONL)')
        stem.add_argument('--tau', type=float, default=DEFAULTS.tau_s, help='Text similarity threshold tau_s')
        stem.add_argument('--tau-sweep', type=float_list, default=None, help='Extra thresholds, e.g. 0.3,0.5,0.7')
        self.add_embedder_argument(stem)

        mtgs = add_subcommand(subparsers, parser, 'mtgs', 'Matched temporal grounding score')
        mtgs.add_argument('--gt', required=True, help='Ground-truth dataset (JSONL)')
        mtgs.add_argument('--pred', required=True, help='Prediction file (JSONL)')
        mtgs.add_argument(
            '--iou-thresholds',
            type=float_list,
            default=list(DEFAULTS.iou_thresholds),
            help='IoU levels for the pooled hit-rate summary',
        )

        retrieval = add_subcommand(subparsers, parser, 'retrieval', 'Recall@k of video rankings')
        retrieval.add_argument('--qrels', required=True, help='Relevant videos per query (JSONL)')
        retrieval.add_argument('--rankings', required=True, help='Ranked videos per query (JSONL)')
        retrieval.add_argument('--k', type=int_list, default=list(DEFAULTS.recall_ks), help='Cut-offs, e.g. 1,3,5')
        retrieval.add_argument(
            '--recall-denominator',
            default=DEFAULTS.recall_denominator,
            choices=RECALL_DENOMINATORS,
            help='Divide hits by min(k, |relevant|) ("capped") or |relevant|',
        )

        text = add_subcommand(subparsers, parser, 'text', 'BLEU@4, CIDEr and embedding similarity of answers')
        text.add_argument('--gt', required=True, help='Ground-truth dataset (JSONL)')
        text.add_argument('--pred', required=True, help='Prediction file (JSONL)')
        text.add_argument('--cider-variant', default=DEFAULTS.cider_variant, choices=CIDER_VARIANTS, help='CIDEr flavour')
        self.add_embedder_argument(text)

        for subparser in (stem, mtgs, retrieval, text):
            self.add_output_arguments(subparser)
            self.add_evaluation_arguments(subparser)

    def run_command(self, **options):
        metric = options['metric']
        self.record_name = f"eval_{metric}"
        getattr(self, f"evaluate_{metric}")(options)

    # -- shared ---------------------------------------------------------------

    def pair_records(self, options):
        """(gt record, prediction) per ground-truth id; missing predictions become empty answers."""
        gt = load_dataset(options['gt'])
        pred = load_dataset(options['pred']).by_id()
        if not len(gt):
            raise EvaluationError(f"{options['gt']}: no records")
        missing = [record.id for record in gt if record.id not in pred]
        extra = sorted(set(pred) - {record.id for record in gt})
        for record_id in missing:
            logger.warning(f"No prediction for {record_id}; scoring it as an empty answer")
        if extra:
            logger.warning(f"{len(extra)} prediction(s) have no ground truth and are ignored")
        pairs = [
            (record, pred.get(record.id) or QAItem(id=record.id, question=record.question))
            for record in gt
        ]
        return pairs, missing, extra

    # -- stem -----------------------------------------------------------------

    def evaluate_stem(self, options):
        tau = options['tau']
        sweep = options['tau_sweep'] or []
        for value in [tau] + sweep:
            if not 0.0 <= value <= 1.0:
                raise self.usage_error(f"--tau values must lie in [0, 1], got {value}")
        embedder, embedder_name = self.build_embedder(options)
        pairs, missing, extra = self.pair_records(options)
        for record, _ in pairs:
            if not record.steps:
                raise EvaluationError(f"{options['gt']}: record {record.id}, field answer_steps: ground truth has no steps")

        def evaluate_at(threshold):
            return self.map_queries(
                lambda pair: stem_evaluate(pair[0].steps, pair[1].steps, threshold, embedder),
                pairs,
                options['workers'],
            )

        reports = evaluate_at(tau)
        aggregate = stem_aggregate(reports)
        report = {
            'command': 'eval stem',
            'parameters': {'tau_s': tau, 'embedder': embedder_name},
            'queries': len(pairs),
            'aggregate': aggregate.as_dict(),
            'missing_predictions': missing,
            'ignored_predictions': extra,
        }
        if sweep:
            report['tau_sweep'] = {
                _threshold_key(value): stem_aggregate(evaluate_at(value)).as_dict() for value in sweep
            }
        if options['per_query']:
            report['per_query'] = [
                dict(id=record.id, **stem_report.as_dict(include_pairs=True))
                for (record, _), stem_report in zip(pairs, reports)
            ]
        logger.info(f"StEM over {len(pairs)} queries: sm={aggregate.sm:.4f} sh={aggregate.sh:.4f} so={aggregate.so:.4f}")
        self.emit(report, options, summary={
            'sm': aggregate.sm, 'sh': aggregate.sh, 'so': aggregate.so,
            'sfp': aggregate.sfp, 'sfn': aggregate.sfn, 's_iou_mean': aggregate.s_iou_mean,
        })

    # -- mtgs -----------------------------------------------------------------

    def evaluate_mtgs(self, options):
        pairs, missing, extra = self.pair_records(options)
        reports = self.map_queries(
            lambda pair: mtgs_per_query(collect_groundings(pair[0].steps), collect_groundings(pair[1].steps)),
            pairs,
            options['workers'],
        )
        empty = [record.id for (record, _), mtgs in zip(pairs, reports) if mtgs.empty_ground_truth]
        for record_id in empty:
            logger.warning(f"Record {record_id} has no ground-truth groundings; MTGS counted as 0")
        score = mtgs_avg(reports)
        rates = iou_threshold_rates(reports, options['iou_thresholds'])
        report = {
            'command': 'eval mtgs',
            'queries': len(pairs),
            'mtgs_avg': score,
            'iou_hit_rate': {_threshold_key(threshold): rate for threshold, rate in rates.items()},
            'empty_ground_truth': empty,
            'missing_predictions': missing,
            'ignored_predictions': extra,
        }
        if options['per_query']:
            detailed = options.get('verbosity', 1) >= 2
            report['per_query'] = [
                dict(id=record.id, **mtgs.as_dict(include_videos=detailed))
                for (record, _), mtgs in zip(pairs, reports)
            ]
        logger.info(f"MTGS_avg over {len(pairs)} queries: {score:.4f}")
        self.emit(report, options, summary={'mtgs_avg': score})

    # -- retrieval ------------------------------------------------------------

    def evaluate_retrieval(self, options):
        ks = options['k']
        qrels = load_qrels(options['qrels'])
        rankings = load_rankings(options['rankings'])
        flagged = [query_id for query_id, relevant in qrels.items() if not relevant]
        for query_id in flagged:
            logger.warning(f"Query {query_id} has an empty relevant set; skipped")
        scored = [query_id for query_id, relevant in qrels.items() if relevant]
        if not scored:
            raise EvaluationError(f"{options['qrels']}: no query has a relevant video")
        missing = [query_id for query_id in scored if query_id not in rankings]
        for query_id in missing:
            logger.warning(f"No ranking for {query_id}; its recall is 0")

        per_query = self.map_queries(
            lambda query_id: recall_at_k(rankings.get(query_id, ()), qrels[query_id], ks, options['recall_denominator']),
            scored,
            options['workers'],
        )
        means = mean_recall(per_query, ks)
        report = {
            'command': 'eval retrieval',
            'parameters': {'k': ks, 'recall_denominator': options['recall_denominator']},
            'queries': len(scored),
            'recall': {f"R@{k}": value for k, value in means.items()},
            'flagged_empty_relevant': flagged,
            'missing_rankings': missing,
        }
        if options['per_query']:
            report['per_query'] = [
                {'id': query_id, 'recall': {f"R@{k}": value for k, value in recall.items()}}
                for query_id, recall in zip(scored, per_query)
            ]
        logger.info(f"Recall over {len(scored)} queries: " + ", ".join(f"R@{k}={v:.4f}" for k, v in means.items()))
        self.emit(report, options, summary={f"R@{k}": value for k, value in means.items()})

    # -- text -----------------------------------------------------------------

    def evaluate_text(self, options):
        embedder, embedder_name = self.build_embedder(options)
        pairs, missing, extra = self.pair_records(options)
        references = [record.answer_text() for record, _ in pairs]
        predictions = [prediction.answer_text() for _, prediction in pairs]
        alignment, similarities = evaluate_alignment(predictions, references, embedder, options['cider_variant'])
        report = {
            'command': 'eval text',
            'parameters': {'embedder': embedder_name, 'cider_variant': options['cider_variant']},
            'queries': len(pairs),
            'alignment': alignment.as_dict(),
            'missing_predictions': missing,
            'ignored_predictions': extra,
        }
        if options['per_query']:
            report['per_query'] = [
                {'id': record.id, 'text_sim': similarity}
                for (record, _), similarity in zip(pairs, similarities)
            ]
        logger.info(f"Text alignment over {len(pairs)} pairs: bleu4={alignment.bleu4:.4f} cider={alignment.cider:.4f}")
        self.emit(report, options, summary={
            'bleu4': alignment.bleu4, 'cider': alignment.cider, 'text_sim': alignment.text_sim,
        })
