import logging

from avrag.config import DEFAULTS
from avrag.dataio import load_frame_embeddings
from avrag.exceptions import EvaluationError
from avrag.sfs import PenaltyKind, build_affinity, chain_cost, select_frames, uniform_sample_indices
from magnet_app.management.base import MagnetCommand

logger = logging.getLogger(__name__)

STRATEGIES = ('sfs', 'uniform')


class Command(MagnetCommand):
    help = 'Select k salient frames from per-frame embeddings'
    record_name = 'select_frames'

    def add_arguments(self, parser):
        parser.add_argument('--frames', required=True, help='Frame embedding file (JSON)')
        parser.add_argument('--k', type=int, default=DEFAULTS.k, help='Frames to select')
        parser.add_argument('--m', type=int, default=DEFAULTS.m, help='Candidate frames sampled uniformly before selection')
        parser.add_argument('--gamma', type=float, default=DEFAULTS.gamma, help='Temporal separation penalty factor')
        parser.add_argument(
            '--penalty',
            default=DEFAULTS.penalty,
            choices=[kind.value for kind in PenaltyKind],
            help='Separation penalty function',
        )
        parser.add_argument('--lambda', dest='lam', type=float, default=DEFAULTS.lam, help='Rate of the exp penalty')
        parser.add_argument('--strategy', default='sfs', choices=STRATEGIES, help='Dynamic program or uniform baseline')
        parser.add_argument('--raw-index-distance', action='store_true', help='Use the integer frame distance in the penalty')
        parser.add_argument('--free-endpoint', action='store_true', help='Let the last selected frame float instead of ending at m')
        self.add_output_arguments(parser)

    def run_command(self, **options):
        k, m, gamma = options['k'], options['m'], options['gamma']
        if m < 2:
            raise self.usage_error(f"--m must be >= 2, got {m}")
        if not 1 <= k <= m:
            raise self.usage_error(f"--k must be between 1 and --m ({m}), got {k}")
        if gamma < 0:
            raise self.usage_error(f"--gamma must be >= 0, got {gamma}")

        frames = load_frame_embeddings(options['frames'])
        total = len(frames)
        if not total:
            raise EvaluationError(f"{options['frames']}: no frames")
        m = min(m, total)
        if k > m:
            raise self.usage_error(f"--k ({k}) must not exceed the number of candidate frames m ({m})")

        candidates = uniform_sample_indices(total, m)
        affinity = build_affinity(
            [frames[position - 1] for position in candidates],
            gamma,
            PenaltyKind(options['penalty']),
            lam=options['lam'],
            raw_index_distance=options['raw_index_distance'],
        )
        baseline = uniform_sample_indices(m, k)
        baseline_cost = chain_cost(affinity, baseline)

        if options['strategy'] == 'sfs':
            plan = select_frames(affinity, k, free_endpoint=options['free_endpoint'])
            selected, cost = list(plan.selected), plan.cost
        else:
            selected, cost = baseline, baseline_cost

        report = {
            'command': 'select_frames',
            'strategy': options['strategy'],
            'parameters': {
                'k': k,
                'm': m,
                'gamma': gamma,
                'penalty': options['penalty'],
                'lambda': options['lam'] if options['penalty'] == PenaltyKind.EXP.value else None,
                'raw_index_distance': options['raw_index_distance'],
                'free_endpoint': options['free_endpoint'],
            },
            'total_frames': total,
            'selected_positions': selected,
            'selected_frames': [candidates[position - 1] for position in selected],
            'chain_cost': cost,
            'uniform_baseline': {'selected_positions': baseline, 'chain_cost': baseline_cost},
            'warnings': list(affinity.warnings),
        }
        logger.info(f"Selected frames {report['selected_frames']} of {total} (cost {cost:.6f})")
        self.emit(report, options, summary={'chain_cost': cost, 'selected_frames': report['selected_frames']})
