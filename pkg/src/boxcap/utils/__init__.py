"""
Utility functions for boxcap.

Contains helper functions, constants and the exception hierarchy.
"""

from .constants import (
    DataDefaults,
    Levels,
    NeighborModes,
    Palette,
    Segments,
    SpecialTokens,
    Tasks,
    Zones,
)
from .errors import (
    BoxcapError,
    CheckpointError,
    ConfigError,
    DatasetError,
    MetricError,
    NonFiniteError,
)
from .helpers import ensure_directory_exists, read_jsonl, seed_everything, write_jsonl

__all__ = [
    "DataDefaults",
    "Levels",
    "NeighborModes",
    "Palette",
    "Segments",
    "SpecialTokens",
    "Tasks",
    "Zones",
    "BoxcapError",
    "CheckpointError",
    "ConfigError",
    "DatasetError",
    "MetricError",
    "NonFiniteError",
    "ensure_directory_exists",
    "read_jsonl",
    "seed_everything",
    "write_jsonl",
]
