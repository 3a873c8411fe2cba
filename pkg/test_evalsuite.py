"""
Tests for the accuracy, diversity and fitness metrics and the report.
"""
import math

import numpy as np
import pytest

from boxcap.data.synth import box_zone, synth_cards
from boxcap.data.vocab import build_vocab
from boxcap.eval.fitness import (
    aspect_bucket,
    assign_clusters,
    bucket_label,
    cluster_agreement,
    cluster_ari,
    cluster_types,
    length_fitness,
)
from boxcap.eval.metrics import bleu_n, cider, div_n, exact_match
from boxcap.eval.report import REPORT_KEYS, build_report, write_report
from boxcap.utils.constants import Zones
from boxcap.utils.errors import MetricError
from conftest import make_card


def _brute_bleu(predictions, references, n):
    hyps = [p.split() for p in predictions]
    refs = [r.split() for r in references]
    c = sum(len(h) for h in hyps)
    r = sum(len(x) for x in refs)
    log_sum = 0.0
    for k in range(1, n + 1):
        matched = total = 0
        for hyp, ref in zip(hyps, refs):
            hyp_grams = [tuple(hyp[i : i + k]) for i in range(len(hyp) - k + 1)]
            ref_grams = [tuple(ref[i : i + k]) for i in range(len(ref) - k + 1)]
            for gram in set(hyp_grams):
                matched += min(hyp_grams.count(gram), ref_grams.count(gram))
            total += len(hyp_grams)
        if matched == 0:
            return 0.0
        log_sum += math.log(matched / total)
    penalty = 1.0 if c > r else math.exp(1.0 - r / c)
    return penalty * math.exp(log_sum / n)


def _brute_cider(predictions, references, max_order=4):
    n_docs = len(references)
    scores = np.zeros(len(predictions))
    for k in range(1, max_order + 1):

        def grams(text):
            tokens = text.split()
            return [tuple(tokens[i : i + k]) for i in range(len(tokens) - k + 1)]

        ref_grams = [grams(r) for r in references]
        hyp_grams = [grams(p) for p in predictions]
        space = sorted({g for doc in ref_grams + hyp_grams for g in doc})
        index = {g: i for i, g in enumerate(space)}
        df = np.array([sum(g in set(doc) for doc in ref_grams) for g in space], dtype=float)
        idf = math.log(n_docs) - np.log(np.maximum(df, 1.0))
        for box, (hyp, ref) in enumerate(zip(hyp_grams, ref_grams)):
            a = np.zeros(len(space))
            b = np.zeros(len(space))
            for g in hyp:
                a[index[g]] += 1
            for g in ref:
                b[index[g]] += 1
            a, b = a * idf, b * idf
            norm = np.linalg.norm(a) * np.linalg.norm(b)
            if norm > 0:
                scores[box] += 10.0 * float(a @ b) / norm / max_order
    return float(scores.mean())


def _toy_corpus(rng):
    alphabet = list("abcde")
    cards = []
    for _ in range(int(rng.integers(2, 6))):
        boxes = []
        for _ in range(int(rng.integers(1, 5))):
            pred = " ".join(rng.choice(alphabet, size=int(rng.integers(1, 7))))
            ref = " ".join(rng.choice(alphabet, size=int(rng.integers(1, 7))))
            boxes.append((pred, ref))
        cards.append(boxes)
    return cards


def test_bleu_examples():
    """Test BLEU on perfect, disjoint and hand-computed predictions."""
    refs = ["a b c d e", "f g h i"]
    assert bleu_n(refs, refs, 4) == 1.0
    assert bleu_n(["x y z", "w v u"], refs, 1) == 0.0
    assert abs(bleu_n(["a b c"], ["a b d"], 1) - 2 / 3) < 1e-12
    assert abs(bleu_n(["a b c"], ["a b d"], 1) - 0.6667) < 1e-4


def test_bleu_brevity_penalty():
    score = bleu_n(["a b"], ["a b c d"], 1)
    assert abs(score - math.exp(1.0 - 4 / 2)) < 1e-12


def test_empty_corpus_is_an_error():
    with pytest.raises(MetricError):
        bleu_n([], [])
    with pytest.raises(MetricError):
        cider([], [])
    with pytest.raises(MetricError):
        bleu_n(["a"], ["a", "b"])


def test_cider_examples():
    """Test CIDEr on unique-n-gram references and on disjoint predictions."""
    refs = ["a b c d", "e f g h", "i j k l"]
    assert abs(cider(refs, refs) - 10.0) < 1e-12
    assert cider(["x y z w", "v u t s", "r q p o"], refs) == 0.0
    with pytest.raises(MetricError):
        cider(["a b"], ["a b"])


def test_cider_is_scale_invariant():
    """Test that doubling unigram counts leaves the cosine unchanged."""
    refs = ["a b c", "c d e", "a e f"]
    preds = ["a b", "d e", "f a"]
    doubled = [f"{p} {p}" for p in preds]
    assert abs(cider(doubled, refs, max_order=1) - cider(preds, refs, max_order=1)) < 1e-12


def test_metrics_match_brute_force():
    """Test BLEU and CIDEr against direct computations on random toy corpora."""
    rng = np.random.default_rng(20)
    for _ in range(20):
        boxes = [pair for card in _toy_corpus(rng) for pair in card]
        preds = [p for p, _ in boxes]
        refs = [r for _, r in boxes]
        for n in (1, 4):
            assert abs(bleu_n(preds, refs, n) - _brute_bleu(preds, refs, n)) < 1e-9
        assert abs(cider(preds, refs) - _brute_cider(preds, refs)) < 1e-9


def test_div_examples():
    """Test Div@n on duplicated, distinct and overlapping captions."""
    assert div_n([["a b", "a b"]], 1) == 50.0
    assert div_n([["a b", "c d"]], 1) == 100.0
    assert div_n([["a b c", "b c d"]], 2) == 75.0
    assert abs(div_n([["a b c"] * 3], 1) - 100.0 * 3 / (3 * 3)) < 1e-12


def test_div_skips_cards_without_ngrams():
    assert div_n([["a b", "c d"], ["x", "y"]], 2) == 100.0
    with pytest.raises(MetricError):
        div_n([["x", "y"]], 2)


def test_metrics_are_card_order_invariant():
    rng = np.random.default_rng(3)
    cards = _toy_corpus(rng) + _toy_corpus(rng)
    shuffled = [cards[i] for i in rng.permutation(len(cards))]

    def scores(corpus):
        preds = [p for card in corpus for p, _ in card]
        refs = [r for card in corpus for _, r in card]
        return (
            bleu_n(preds, refs, 4),
            cider(preds, refs),
            div_n([[p for p, _ in card] for card in corpus], 1),
        )

    assert scores(cards) == pytest.approx(scores(shuffled), abs=1e-12)


def test_exact_match():
    assert exact_match(["a b", "c d"], ["a  b", "c e"]) == 0.5


def test_aspect_buckets():
    assert aspect_bucket(1.0) == 1
    assert aspect_bucket(4.9) == 4
    assert aspect_bucket(9.2) == 9
    assert aspect_bucket(30.0) == 9
    assert bucket_label(2) == "[2,3)"
    assert bucket_label(9) == "[9,10+]"


def test_length_fitness_examples():
    """Test the degenerate single bucket and monotone curves."""
    flat = length_fitness([4.0, 4.0, 4.0], ["a b c d"] * 3)
    assert flat.means == {4: 4.0}
    assert flat.correlation is None

    rising = length_fitness([2.0, 2.5, 5.0], ["a b c", "a b c", "a b c d e f"])
    assert rising.means == {2: 3.0, 5: 6.0}
    assert rising.monotone
    assert not length_fitness([2.0, 5.0], ["a b c d e f", "a b c"]).monotone

    with pytest.raises(MetricError):
        length_fitness([], [])


def test_oracle_captions_fit_perfectly():
    """Test that synthetic captions correlate exactly with their aspect ratios."""
    cards = synth_cards(30, seed=2).cards
    ratios = [box.aspect_ratio_on(c.width, c.height) for c in cards for box in c.boxes]
    captions = [caption for card in cards for caption in card.captions]
    fitness = length_fitness(ratios, captions)
    assert abs(fitness.correlation - 1.0) < 1e-9
    assert fitness.monotone


def _one_hot(vocab):
    return np.eye(len(vocab))


def test_cluster_small_cases():
    """Test one cluster per caption when k equals n, and duplicate captions."""
    card = make_card(["a b", "c d", "e f", "g h"])
    vocab = build_vocab([card])
    embedding = np.random.default_rng(0).normal(size=(len(vocab), 8))
    captions, boxes = card.captions, card.boxes
    result = cluster_types(captions, boxes, embedding, vocab, k=4)
    assert sorted(result.labels.tolist()) == [0, 1, 2, 3]

    doubled = cluster_types(captions + captions, boxes + boxes, embedding, vocab, k=4)
    assert doubled.labels[:4].tolist() == doubled.labels[4:].tolist()

    with pytest.raises(MetricError):
        cluster_types(captions[:3], boxes[:3], embedding, vocab, k=4)


def test_clusters_recover_zones():
    """Test that caption types align with the layout zones."""
    cards = synth_cards(60, seed=4).cards
    vocab = build_vocab(cards)
    captions = [caption for card in cards for caption in card.captions]
    boxes = [box for card in cards for box in card.boxes]
    zone_index = Zones.get_zone_index()
    truth = [zone_index[box_zone(box)] for box in boxes]

    result = cluster_types(captions, boxes, _one_hot(vocab), vocab, k=4, seed=0)
    assert cluster_ari(result.labels, truth) > 0.7
    assert result.heatmap.shape == (4, 8, 8)
    assert int(result.heatmap.sum()) == len(boxes)

    again = assign_clusters(result, captions, _one_hot(vocab), vocab)
    assert cluster_agreement(result.labels, again) == 1.0
    assert cluster_ari(truth, truth) == 1.0


def _reference_predictions(cards, replace=None):
    return {
        card.card_id: {
            i: (box, replace if replace is not None else caption)
            for i, (box, caption) in enumerate(card.items)
        }
        for card in cards
    }


def test_report_on_perfect_predictions(tmp_path):
    """Test the report keys and scores when predictions equal references."""
    cards = synth_cards(8, seed=6).cards
    report = build_report(_reference_predictions(cards), cards)
    values = report.as_dict()
    assert tuple(values) == REPORT_KEYS
    assert values["B@1"] == "100.0000"
    assert values["B@4"] == "100.0000"
    assert values["fitness"] == "1.0000"
    assert values["clusters"] == "n/a"

    written = write_report(report, tmp_path / "report.txt", tables=True)
    lines = (tmp_path / "report.txt").read_text().splitlines()
    assert [line.split(" = ")[0] for line in lines] == list(REPORT_KEYS)
    assert [p.name for p in written] == ["report.txt", "report_fitness.csv"]


def test_report_with_clusters(tmp_path):
    cards = synth_cards(12, seed=7).cards
    vocab = build_vocab(cards)
    report = build_report(_reference_predictions(cards), cards, _one_hot(vocab), vocab)
    assert report.agreement == 1.0
    written = write_report(report, tmp_path / "out" / "report.txt", tables=True)
    assert {p.name for p in written} == {
        "report.txt",
        "report_fitness.csv",
        "report_clusters.csv",
        "report_cluster_map.csv",
    }
    header = (tmp_path / "out" / "report_clusters.csv").read_text().splitlines()[0]
    assert header == "cluster,reference_count,generated_count"


def test_report_undefined_fitness():
    cards = synth_cards(3, seed=8).cards
    report = build_report(_reference_predictions(cards, replace="same two"), cards)
    assert report.as_dict()["fitness"] == "n/a"


def test_report_requires_every_box():
    cards = synth_cards(3, seed=9).cards
    predictions = _reference_predictions(cards[:2])
    with pytest.raises(MetricError, match="no predictions"):
        build_report(predictions, cards)
    predictions = _reference_predictions(cards)
    del predictions[cards[0].card_id][0]
    with pytest.raises(MetricError, match="boxes \\[0\\]"):
        build_report(predictions, cards)
