"""
Caption accuracy and diversity metrics for boxcap.

Corpus BLEU, CIDEr with a single reference per box, per-card Div@n and exact
match. Captions are tokenized with the shared text codec, so CJK text is scored
per character.
"""

import logging
import math
from collections import Counter

from ..data.vocab import tokenize
from ..utils.errors import MetricError

logger = logging.getLogger(__name__)

CIDER_MAX_ORDER = 4
CIDER_SCALE = 10.0


def ngrams(tokens, n):
    """All n-grams of a token list as tuples, in order."""
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def _aligned(predictions, references):
    predictions, references = list(predictions), list(references)
    if len(predictions) != len(references):
        raise MetricError(
            f"{len(predictions)} predictions for {len(references)} references"
        )
    if not predictions:
        raise MetricError("cannot score an empty corpus")
    return predictions, references


def bleu_n(predictions, references, n=4):
    """
    Corpus-level BLEU.

    Clipped n-gram counts and candidate n-gram totals are summed over the corpus
    for orders 1..n; the score is the geometric mean of the modified precisions
    times the brevity penalty.

    Args:
        predictions (list): Generated captions
        references (list): One reference caption per prediction
        n (int): Highest n-gram order

    Returns:
        float: BLEU in [0, 1]
    """
    predictions, references = _aligned(predictions, references)
    clipped = [0] * n
    totals = [0] * n
    candidate_len = reference_len = 0
    for prediction, reference in zip(predictions, references):
        hyp, ref = tokenize(prediction), tokenize(reference)
        candidate_len += len(hyp)
        reference_len += len(ref)
        for order in range(1, n + 1):
            hyp_counts = Counter(ngrams(hyp, order))
            ref_counts = Counter(ngrams(ref, order))
            clipped[order - 1] += sum(
                min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
            )
            totals[order - 1] += max(0, len(hyp) - order + 1)

    if candidate_len == 0 or min(clipped) == 0:
        return 0.0
    log_precision = sum(math.log(c / t) for c, t in zip(clipped, totals)) / n
    if candidate_len > reference_len:
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - reference_len / candidate_len)
    return brevity * math.exp(log_precision)


def _cider_vectors(counts, document_frequency, log_n):
    vectors, norms = [], []
    for order_counts in counts:
        vector = {
            gram: tf * (log_n - math.log(max(1.0, document_frequency[gram])))
            for gram, tf in order_counts.items()
        }
        vectors.append(vector)
        norms.append(math.sqrt(sum(v * v for v in vector.values())))
    return vectors, norms


def _order_counts(caption, max_order):
    tokens = tokenize(caption)
    return [Counter(ngrams(tokens, order)) for order in range(1, max_order + 1)]


def cider(predictions, references, max_order=CIDER_MAX_ORDER):
    """
    CIDEr with one reference per box.

    N-grams are weighted by term frequency times inverse document frequency
    over the reference corpus; each box scores the mean TF-IDF cosine over
    orders 1..max_order times 10. Orders where either side has no n-grams
    contribute 0.

    Args:
        predictions (list): Generated captions
        references (list): One reference caption per prediction
        max_order (int): Highest n-gram order

    Returns:
        float: Mean box score
    """
    predictions, references = _aligned(predictions, references)
    if len(references) < 2:
        raise MetricError("CIDEr needs a corpus of at least two boxes")

    reference_counts = [_order_counts(ref, max_order) for ref in references]
    document_frequency = Counter()
    for counts in reference_counts:
        for order_counts in counts:
            document_frequency.update(order_counts.keys())
    log_n = math.log(float(len(references)))

    scores = []
    for prediction, ref_counts in zip(predictions, reference_counts):
        hyp_vec, hyp_norm = _cider_vectors(
            _order_counts(prediction, max_order), document_frequency, log_n
        )
        ref_vec, ref_norm = _cider_vectors(ref_counts, document_frequency, log_n)
        total = 0.0
        for order in range(max_order):
            denominator = hyp_norm[order] * ref_norm[order]
            if denominator == 0.0:
                continue
            numerator = sum(
                value * ref_vec[order].get(gram, 0.0)
                for gram, value in hyp_vec[order].items()
            )
            total += numerator / denominator
        scores.append(CIDER_SCALE * total / max_order)
    return sum(scores) / len(scores)


def div_n(card_captions, n):
    """
    Div@n: ratio of unique to total n-grams pooled per card, averaged over cards.

    N-grams never cross caption boundaries. Cards whose captions have no n-gram
    of order n are skipped.

    Args:
        card_captions (iterable): One list of captions per card
        n (int): N-gram order

    Returns:
        float: Diversity in [0, 100]
    """
    ratios = []
    skipped = 0
    for captions in card_captions:
        pooled = [gram for caption in captions for gram in ngrams(tokenize(caption), n)]
        if not pooled:
            skipped += 1
            continue
        ratios.append(len(set(pooled)) / len(pooled))
    if skipped:
        logger.debug("Div@%d skipped %d cards without %d-grams", n, skipped, n)
    if not ratios:
        raise MetricError(f"no card has any {n}-gram")
    return 100.0 * sum(ratios) / len(ratios)


def exact_match(predictions, references):
    """Fraction of predictions whose tokens equal the reference tokens."""
    predictions, references = _aligned(predictions, references)
    hits = sum(tokenize(p) == tokenize(r) for p, r in zip(predictions, references))
    return hits / len(predictions)
