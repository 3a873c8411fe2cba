"""
Fitness analyses for boxcap.

How well generated captions fit their boxes: caption length against box
aspect ratio, and caption types clustered from word embeddings and mapped
over the image.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score

from ..data.loader import caption_length
from ..utils.errors import MetricError

logger = logging.getLogger(__name__)

MAX_BUCKET = 9
DEFAULT_CLUSTERS = 4


def aspect_bucket(aspect_ratio):
    """Bucket b covers [b, b + 1); the last bucket is [9, inf)."""
    return min(max(int(math.floor(aspect_ratio)), 1), MAX_BUCKET)


def bucket_label(bucket):
    return f"[{bucket},10+]" if bucket == MAX_BUCKET else f"[{bucket},{bucket + 1})"


@dataclass
class LengthFitness:
    """Mean caption length per aspect-ratio bucket."""

    means: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    correlation: float = None  # None when undefined
    monotone: bool = True


def _pearson(xs, ys):
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 2 or np.std(x) == 0.0 or np.std(y) == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def length_fitness(aspect_ratios, captions):
    """
    Caption length against box aspect ratio.

    Args:
        aspect_ratios (list): Aspect ratio of every box
        captions (list): Caption generated for every box

    Returns:
        LengthFitness: Bucket means, Pearson correlation and monotonicity
    """
    aspect_ratios, captions = list(aspect_ratios), list(captions)
    if not captions or len(aspect_ratios) != len(captions):
        raise MetricError(
            "length fitness needs one caption per box and at least one box"
        )

    lengths = [caption_length(caption) for caption in captions]
    sums, counts = {}, {}
    for ratio, length in zip(aspect_ratios, lengths):
        bucket = aspect_bucket(ratio)
        sums[bucket] = sums.get(bucket, 0) + length
        counts[bucket] = counts.get(bucket, 0) + 1

    means = {bucket: sums[bucket] / counts[bucket] for bucket in sorted(counts)}
    ordered = list(means.values())
    return LengthFitness(
        means=means,
        counts={bucket: counts[bucket] for bucket in sorted(counts)},
        correlation=_pearson(aspect_ratios, lengths),
        monotone=all(a <= b for a, b in zip(ordered, ordered[1:])),
    )


def caption_embeddings(captions, embedding, vocab):
    """
    Mean word embedding of every caption.

    Args:
        captions (list): Caption strings
        embedding (numpy.ndarray): V x d word embedding table
        vocab (Vocabulary): Vocabulary indexing the table

    Returns:
        numpy.ndarray: len(captions) x d
    """
    table = np.asarray(embedding, dtype=np.float64)
    rows = []
    for caption in captions:
        ids = vocab.encode(caption)
        rows.append(table[ids].mean(axis=0) if ids else np.zeros(table.shape[1]))
    return np.stack(rows) if rows else np.zeros((0, table.shape[1]))


@dataclass
class ClusterResult:
    """k-means caption types and where on the image each type appears."""

    labels: np.ndarray
    heatmap: np.ndarray  # k x grid x grid box-centre counts
    kmeans: KMeans

    @property
    def n_clusters(self):
        return int(self.heatmap.shape[0])


def spatial_map(labels, boxes, k, grid):
    """Count box centres per cluster on a grid x grid map."""
    heatmap = np.zeros((k, grid, grid), dtype=np.int64)
    for label, box in zip(labels, boxes):
        cx, cy = box.center
        col = min(int(math.floor(cx * grid)), grid - 1)
        row = min(int(math.floor(cy * grid)), grid - 1)
        heatmap[int(label), row, col] += 1
    return heatmap


def cluster_types(
    captions, boxes, embedding, vocab, k=DEFAULT_CLUSTERS, seed=0, grid=8
):
    """
    Group captions into k types by k-means over their mean word embeddings.

    Args:
        captions (list): Caption strings
        boxes (list): TextBox of every caption
        embedding (numpy.ndarray): V x d word embedding table
        vocab (Vocabulary): Vocabulary indexing the table
        k (int): Number of clusters
        seed (int): k-means seed
        grid (int): Heat map resolution

    Returns:
        ClusterResult: Labels, spatial heat map and the fitted model
    """
    if len(captions) < k:
        raise MetricError(f"need at least {k} captions to form {k} clusters")
    features = caption_embeddings(captions, embedding, vocab)
    kmeans = KMeans(n_clusters=k, n_init=10, random_state=seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        labels = kmeans.fit_predict(features)
    for warning in caught:
        logger.warning("k-means: %s", warning.message)
    return ClusterResult(
        labels=labels,
        heatmap=spatial_map(labels, boxes, k, grid),
        kmeans=kmeans,
    )


def assign_clusters(result, captions, embedding, vocab):
    """Place captions, e.g. generated ones, into previously fitted clusters."""
    if not captions:
        return np.zeros(0, dtype=np.int64)
    return result.kmeans.predict(caption_embeddings(captions, embedding, vocab))


def cluster_agreement(reference_labels, predicted_labels):
    """Fraction of boxes whose generated caption shares the reference cluster."""
    reference_labels = np.asarray(reference_labels)
    predicted_labels = np.asarray(predicted_labels)
    if reference_labels.shape != predicted_labels.shape or reference_labels.size == 0:
        raise MetricError(
            "cluster agreement needs two equally long, nonempty labelings"
        )
    return float(np.mean(reference_labels == predicted_labels))


def cluster_ari(labels, truth):
    """Adjusted Rand index between cluster labels and ground-truth labels."""
    return float(adjusted_rand_score(truth, labels))
