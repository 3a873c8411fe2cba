"""
Evaluation report for boxcap.

Joins a prediction file with its reference split, computes the metric set and
writes it as flat key-value text with optional comma-separated tables.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..utils.errors import MetricError
from ..utils.helpers import ensure_directory_exists
from .fitness import (
    ClusterResult,
    LengthFitness,
    assign_clusters,
    bucket_label,
    cluster_agreement,
    cluster_types,
    length_fitness,
)
from .metrics import bleu_n, cider, div_n

logger = logging.getLogger(__name__)

REPORT_KEYS = ("B@1", "B@4", "CIDEr", "D@1", "D@2", "fitness", "clusters")
NOT_AVAILABLE = "n/a"


@dataclass
class MetricReport:
    """
    Accuracy, diversity and fitness of a prediction set.

    BLEU, CIDEr and Div@n are scaled by 100; CIDEr is reported as 100 times the
    usual 0-10 score.
    """

    bleu1: float
    bleu4: float
    cider: float
    div1: float
    div2: float
    fitness: LengthFitness
    clusters: ClusterResult = None
    generated_labels: np.ndarray = None
    agreement: float = None

    def as_dict(self):
        """Flat report values keyed by REPORT_KEYS."""

        def number(value):
            return NOT_AVAILABLE if value is None else f"{value:.4f}"

        return {
            "B@1": number(self.bleu1),
            "B@4": number(self.bleu4),
            "CIDEr": number(self.cider),
            "D@1": number(self.div1),
            "D@2": number(self.div2),
            "fitness": number(self.fitness.correlation),
            "clusters": number(self.agreement),
        }


def align_predictions(predictions, references):
    """
    Pair every reference box with its prediction.

    Args:
        predictions (dict): card id -> {box index: (box, caption)}
        references (iterable): Reference cards

    Returns:
        list: (card, generated captions) per reference card
    """
    pairs = []
    for card in references:
        generated = predictions.get(card.card_id)
        if generated is None:
            raise MetricError(f"no predictions for card '{card.card_id}'")
        missing = [i for i in range(len(card.items)) if i not in generated]
        if missing:
            raise MetricError(
                f"card '{card.card_id}' has no prediction for boxes {missing}"
            )
        pairs.append((card, [generated[i][1] for i in range(len(card.items))]))
    extra = set(predictions) - {card.card_id for card, _ in pairs}
    if extra:
        logger.warning("Ignoring predictions for %d unknown cards", len(extra))
    return pairs


def build_report(predictions, references, embedding=None, vocab=None, k=4, seed=0):
    """
    Compute the full metric set.

    Args:
        predictions (dict): Result of read_predictions
        references (iterable): Reference cards
        embedding (numpy.ndarray): Optional word embedding table for clustering
        vocab (Vocabulary): Vocabulary indexing ``embedding``
        k (int): Number of caption types
        seed (int): k-means seed

    Returns:
        MetricReport: The report
    """
    pairs = align_predictions(predictions, references)
    generated = [caption for _, captions in pairs for caption in captions]
    truth = [caption for card, _ in pairs for caption in card.captions]
    boxes = [box for card, _ in pairs for box in card.boxes]
    ratios = [
        box.aspect_ratio_on(card.width, card.height)
        for card, _ in pairs
        for box in card.boxes
    ]

    report = MetricReport(
        bleu1=100.0 * bleu_n(generated, truth, 1),
        bleu4=100.0 * bleu_n(generated, truth, 4),
        cider=100.0 * cider(generated, truth),
        div1=div_n([captions for _, captions in pairs], 1),
        div2=div_n([captions for _, captions in pairs], 2),
        fitness=length_fitness(ratios, generated),
    )
    if embedding is not None:
        clusters = cluster_types(truth, boxes, embedding, vocab, k=k, seed=seed)
        labels = assign_clusters(clusters, generated, embedding, vocab)
        report.clusters, report.generated_labels = clusters, labels
        report.agreement = cluster_agreement(clusters.labels, labels)
    return report


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_report(report, path, tables=False):
    """
    Write the report as ``key = value`` lines.

    With ``tables`` set, ``<stem>_fitness.csv`` and, when clusters are present,
    ``<stem>_clusters.csv`` and ``<stem>_cluster_map.csv`` are written alongside.

    Returns:
        list: Paths written
    """
    path = Path(path)
    ensure_directory_exists(path.parent)
    values = report.as_dict()
    path.write_text(
        "".join(f"{key} = {values[key]}\n" for key in REPORT_KEYS), encoding="utf-8"
    )
    written = [path]
    if not tables:
        return written

    fitness_path = path.with_name(f"{path.stem}_fitness.csv")
    _write_csv(
        fitness_path,
        ("bucket", "count", "mean_length"),
        [
            (bucket_label(bucket), report.fitness.counts[bucket], f"{mean:.4f}")
            for bucket, mean in report.fitness.means.items()
        ],
    )
    written.append(fitness_path)

    if report.clusters is not None:
        k = report.clusters.n_clusters
        reference = np.bincount(report.clusters.labels, minlength=k)
        generated = np.bincount(report.generated_labels, minlength=k)
        clusters_path = path.with_name(f"{path.stem}_clusters.csv")
        _write_csv(
            clusters_path,
            ("cluster", "reference_count", "generated_count"),
            [(c, int(reference[c]), int(generated[c])) for c in range(k)],
        )
        map_path = path.with_name(f"{path.stem}_cluster_map.csv")
        heatmap = report.clusters.heatmap
        _write_csv(
            map_path,
            ("cluster", "row", "col", "count"),
            [
                (c, r, q, int(heatmap[c, r, q]))
                for c, r, q in zip(*np.nonzero(heatmap))
            ],
        )
        written.extend([clusters_path, map_path])
    return written
