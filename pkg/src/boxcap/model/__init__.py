"""
Model module for boxcap.

Contains the context encoders, the captioning transformer and batch assembly.
"""

from .batching import BatchBuilder, MultimodalBatch, Sample
from .encoders import (
    ContextEncoder,
    VisualBackbone,
    box_to_grid,
    neighbor_context,
    select_neighbors,
)
from .net import BoxCaptioner, CaptionOutput, build_attention_mask, cg_loss, cm_loss

__all__ = [
    "BatchBuilder",
    "MultimodalBatch",
    "Sample",
    "ContextEncoder",
    "VisualBackbone",
    "box_to_grid",
    "neighbor_context",
    "select_neighbors",
    "BoxCaptioner",
    "CaptionOutput",
    "build_attention_mask",
    "cg_loss",
    "cm_loss",
]
