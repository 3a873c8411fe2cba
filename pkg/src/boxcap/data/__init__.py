"""
Data module for boxcap.

Contains the card schema, dataset loading and cleaning, the synthetic card
generator and the shared text codec.
"""

from .cards import SPLITS, Card, DatasetSplit, TextBox
from .loader import (
    DatasetStats,
    dataset_stats,
    dedup_cards,
    filter_captions,
    load_dataset,
    mask_text_pixels,
    save_dataset,
)
from .synth import (
    box_zone,
    oracle_captions,
    ordered_list_mask,
    synth_cards,
    synth_splits,
)
from .vocab import Vocabulary, build_vocab, tokenize

__all__ = [
    "SPLITS",
    "Card",
    "DatasetSplit",
    "TextBox",
    "DatasetStats",
    "dataset_stats",
    "dedup_cards",
    "filter_captions",
    "load_dataset",
    "mask_text_pixels",
    "save_dataset",
    "box_zone",
    "oracle_captions",
    "ordered_list_mask",
    "synth_cards",
    "synth_splits",
    "Vocabulary",
    "build_vocab",
    "tokenize",
]
