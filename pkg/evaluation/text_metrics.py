"""
Response alignment: corpus BLEU-4, CIDEr-D (or plain CIDEr) and embedding
cosine between predicted and reference answers.

Tokenization is avrag.embedding.tokenize (lowercase, split on runs of
non-alphanumeric characters) for every metric.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from nltk.translate.bleu_score import corpus_bleu

from avrag.embedding import TextEmbedder, cosine_similarity, tokenize
from avrag.exceptions import EvaluationError

logger = logging.getLogger(__name__)

MAX_ORDER = 4
CIDER_SIGMA = 6.0
CIDER_VARIANTS = ("cider-d", "cider")


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_corpus(predictions: Sequence[str], references: Sequence[str]):
    if len(predictions) != len(references):
        raise EvaluationError(f"{len(predictions)} predictions for {len(references)} references")
    if not predictions:
        raise EvaluationError("empty corpus")


def bleu4(predictions: Sequence[str], references: Sequence[str]) -> float:
    """
    Corpus BLEU with uniform weights over 1..4-grams and brevity penalty,
    no smoothing. An order with no n-grams on either side has precision 1.
    CIDEr treats such an order as 0 instead (see cider_scores).
    """
    _check_corpus(predictions, references)
    pred_tokens = [tokenize(text) for text in predictions]
    ref_tokens = [tokenize(text) for text in references]

    # orders present on some side; once an order is empty everywhere, all higher ones are too
    orders = 0
    for n in range(1, MAX_ORDER + 1):
        clipped = total = ref_total = 0
        for pred, ref in zip(pred_tokens, ref_tokens):
            pred_counts = ngram_counts(pred, n)
            ref_counts = ngram_counts(ref, n)
            clipped += sum(min(count, ref_counts[gram]) for gram, count in pred_counts.items())
            total += sum(pred_counts.values())
            ref_total += sum(ref_counts.values())
        if total == 0 and ref_total == 0:
            break
        if clipped == 0:
            return 0.0
        orders = n
    if orders == 0:
        return 1.0

    weights = (1.0 / MAX_ORDER,) * orders
    return float(corpus_bleu([[ref] for ref in ref_tokens], pred_tokens, weights=weights))


def _tfidf(counts: Dict[int, Counter], df: Dict[Tuple[str, ...], int], log_corpus: float):
    vectors, norms = {}, {}
    for n, grams in counts.items():
        vector = {gram: count * (log_corpus - math.log(max(1.0, df.get(gram, 0)))) for gram, count in grams.items()}
        vectors[n] = vector
        norms[n] = math.sqrt(sum(value * value for value in vector.values()))
    return vectors, norms


def cider_scores(predictions: Sequence[str], references: Sequence[str], variant: str = "cider-d") -> List[float]:
    """
    Per-pair CIDEr, already scaled by 10.

    Document frequency comes from the references. CIDEr-D clips each
    hypothesis weight at the reference weight and applies a Gaussian length
    penalty (sigma 6, token counts); plain CIDEr is the unclipped cosine.

    The per-order cosines are always averaged over all four orders, so an
    order a short text cannot form contributes 0: two identical 2-token texts
    score 5, not 10. BLEU instead leaves such orders out of its geometric
    mean. Both follow the usual captioning-metric conventions.
    """
    _check_corpus(predictions, references)
    if variant not in CIDER_VARIANTS:
        raise EvaluationError(f"unknown CIDEr variant {variant!r}")
    if len(references) < 2:
        raise EvaluationError(
            "CIDEr needs at least 2 prediction/reference pairs to estimate document frequency; "
            "evaluate the whole dataset at once"
        )

    pred_tokens = [tokenize(text) for text in predictions]
    ref_tokens = [tokenize(text) for text in references]
    pred_counts = [{n: ngram_counts(tokens, n) for n in range(1, MAX_ORDER + 1)} for tokens in pred_tokens]
    ref_counts = [{n: ngram_counts(tokens, n) for n in range(1, MAX_ORDER + 1)} for tokens in ref_tokens]

    df: Counter = Counter()
    for counts in ref_counts:
        for grams in counts.values():
            df.update(grams.keys())
    log_corpus = math.log(float(len(references)))

    scores = []
    for hyp, ref, hyp_tokens, r_tokens in zip(pred_counts, ref_counts, pred_tokens, ref_tokens):
        hyp_vec, hyp_norm = _tfidf(hyp, df, log_corpus)
        ref_vec, ref_norm = _tfidf(ref, df, log_corpus)
        delta = float(len(hyp_tokens) - len(r_tokens))
        per_order = []
        for n in range(1, MAX_ORDER + 1):
            if variant == "cider-d":
                value = sum(
                    min(weight, ref_vec[n].get(gram, 0.0)) * ref_vec[n].get(gram, 0.0)
                    for gram, weight in hyp_vec[n].items()
                )
            else:
                value = sum(weight * ref_vec[n].get(gram, 0.0) for gram, weight in hyp_vec[n].items())
            if hyp_norm[n] != 0 and ref_norm[n] != 0:
                value /= hyp_norm[n] * ref_norm[n]
            else:
                value = 0.0
            if variant == "cider-d":
                value *= math.exp(-(delta ** 2) / (2 * CIDER_SIGMA ** 2))
            per_order.append(value)
        scores.append(math.fsum(per_order) / MAX_ORDER * 10.0)
    return scores


def cider(predictions: Sequence[str], references: Sequence[str], variant: str = "cider-d") -> float:
    scores = cider_scores(predictions, references, variant)
    return math.fsum(scores) / len(scores)


def text_sim(prediction: str, reference: str, embedder: TextEmbedder) -> float:
    return cosine_similarity(embedder.embed(prediction), embedder.embed(reference))


@dataclass(frozen=True)
class AlignmentReport:
    bleu4: float
    cider: float
    text_sim: float
    cider_variant: str = "cider-d"
    pairs: int = 0

    @property
    def bleu4_scaled(self) -> float:
        return self.bleu4 * 100.0

    @property
    def cider_scaled(self) -> float:
        return self.cider * 100.0

    @property
    def text_sim_scaled(self) -> float:
        return self.text_sim * 10.0

    def as_dict(self) -> dict:
        return {
            'bleu4': self.bleu4,
            'cider': self.cider,
            'text_sim': self.text_sim,
            'cider_variant': self.cider_variant,
            'pairs': self.pairs,
            'scaled': {
                'bleu4_x100': self.bleu4_scaled,
                'cider_x100': self.cider_scaled,
                'text_sim_x10': self.text_sim_scaled,
            },
        }


def evaluate_alignment(
    predictions: Sequence[str],
    references: Sequence[str],
    embedder: TextEmbedder,
    cider_variant: str = "cider-d",
) -> Tuple[AlignmentReport, List[float]]:
    """Corpus scores plus the per-pair text similarities, in input order."""
    _check_corpus(predictions, references)
    similarities = [text_sim(p, r, embedder) for p, r in zip(predictions, references)]
    report = AlignmentReport(
        bleu4=bleu4(predictions, references),
        cider=cider(predictions, references, cider_variant),
        text_sim=math.fsum(similarities) / len(similarities),
        cider_variant=cider_variant,
        pairs=len(predictions),
    )
    logger.debug(f"Alignment over {report.pairs} pairs: bleu4={report.bleu4:.4f} cider={report.cider:.4f}")
    return report, similarities
