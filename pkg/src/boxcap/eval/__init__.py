"""
Evaluation module for boxcap.

Contains the accuracy and diversity metrics, the fitness analyses and the
report writer.
"""

from .fitness import (
    ClusterResult,
    LengthFitness,
    assign_clusters,
    cluster_agreement,
    cluster_ari,
    cluster_types,
    length_fitness,
)
from .metrics import bleu_n, cider, div_n, exact_match
from .report import MetricReport, build_report, write_report

__all__ = [
    "ClusterResult",
    "LengthFitness",
    "assign_clusters",
    "cluster_agreement",
    "cluster_ari",
    "cluster_types",
    "length_fitness",
    "bleu_n",
    "cider",
    "div_n",
    "exact_match",
    "MetricReport",
    "build_report",
    "write_report",
]
