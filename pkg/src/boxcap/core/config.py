"""
Configuration module for boxcap.

Handles model and training configuration: desk-scale defaults, the full-scale
preset and the flat key-value configuration file.
"""

import dataclasses
import logging
from dataclasses import dataclass, fields
from pathlib import Path

from ..utils.constants import Levels, NeighborModes
from ..utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    """Shape and ablation settings of the captioning transformer."""

    # Default desk-scale model
    layers: int = 2
    width: int = 128
    heads: int = 4
    grid: int = 8
    vocab_size: int = 64
    max_caption_len: int = 11  # 10 caption tokens + EOS
    max_info_len: int = 16
    dropout: float = 0.1
    ffn_mult: int = 4
    backbone_channels: int = 32
    neighbor_mode: str = NeighborModes.TOP1
    use_image: bool = True
    use_location: bool = True
    use_info: bool = True
    tie_weights: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Check the shape invariants."""
        if self.width % 2:
            raise ConfigError(f"width must be even, got {self.width}")
        if self.width % self.heads:
            raise ConfigError(
                f"width {self.width} is not divisible by heads {self.heads}"
            )
        for name in ("layers", "grid", "vocab_size", "max_caption_len", "max_info_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.neighbor_mode not in NeighborModes.get_modes():
            raise ConfigError(
                f"neighbor_mode must be one of {NeighborModes.get_modes()}, "
                f"got '{self.neighbor_mode}'"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    @classmethod
    def desk_scale(cls, **overrides):
        """The small default model."""
        return cls(**overrides)

    @classmethod
    def full_scale(cls, **overrides):
        """L=6, d=1024, A=8, k=8."""
        values = {"layers": 6, "width": 1024, "heads": 8, "grid": 8}
        values.update(overrides)
        return cls(**values)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class TrainConfig:
    """Optimisation and curriculum settings."""

    total_steps: int = 1000
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    warmup_steps: int = 4000
    cg_per_cm: int = 3  # CG batches per CM batch
    checkpoint_interval: int = 0  # 0 disables intermediate checkpoints
    replace_prob: float = 0.6
    cm_strategy: str = "progressive"
    cm_levels: str = "I,II,III"
    grad_clip: float = 1.0
    weight_decay: float = 0.0
    log_every: int = 100
    progress: bool = False

    REQUIRED_KEYS = ("total_steps", "batch_size", "learning_rate", "seed")

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.total_steps < 0:
            raise ConfigError("total_steps must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be non-negative")
        if self.cg_per_cm < 0:
            raise ConfigError("cg_per_cm must be non-negative")
        if not 0.0 <= self.replace_prob <= 1.0:
            raise ConfigError("replace_prob must be in [0, 1]")
        if self.cm_strategy not in ("progressive", "fixed"):
            raise ConfigError(
                "cm_strategy must be 'progressive' or 'fixed', "
                f"got '{self.cm_strategy}'"
            )
        self.levels()

    def levels(self):
        """The enabled caption-matching levels as a tuple."""
        parts = (level.strip() for level in self.cm_levels.split(","))
        chosen = tuple(level for level in parts if level)
        unknown = [level for level in chosen if level not in Levels.get_levels()]
        if unknown or not chosen:
            raise ConfigError(
                f"cm_levels must name levels from I,II,III, got '{self.cm_levels}'"
            )
        return chosen

    @classmethod
    def desk_scale(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def full_scale(cls, **overrides):
        """200K steps with a 4K-step warm-up."""
        values = {"total_steps": 200_000, "warmup_steps": 4000}
        values.update(overrides)
        return cls(**values)

    def to_dict(self):
        return dataclasses.asdict(self)


def _coerce(name, kind, raw):
    if kind is bool or kind == "bool":
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"key '{name}': expected a boolean, got '{raw}'")
    try:
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"key '{name}': cannot parse '{raw}' as {kind}")
    return raw.strip()


def parse_config_text(text):
    """
    Parse flat ``key = value`` lines.

    Args:
        text (str): Configuration text; ``#`` starts a comment

    Returns:
        dict: Raw string values by key
    """
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"key '{key}' given twice")
        values[key] = value
    return values


def split_config(values, require=True):
    """
    Build (TrainConfig, ModelConfig overrides) from raw key-value strings.

    Args:
        values (dict): Raw values by key
        require (bool): Enforce TrainConfig.REQUIRED_KEYS

    Returns:
        tuple: (TrainConfig, dict of ModelConfig field values)
    """
    train_fields = {f.name: f.type for f in fields(TrainConfig)}
    model_fields = {f.name: f.type for f in fields(ModelConfig)}

    if require:
        for key in TrainConfig.REQUIRED_KEYS:
            if key not in values:
                raise ConfigError(f"missing required config key '{key}'")

    train_values, model_values = {}, {}
    for key, raw in values.items():
        if key in train_fields:
            train_values[key] = _coerce(key, train_fields[key], raw)
        elif key in model_fields:
            model_values[key] = _coerce(key, model_fields[key], raw)
        else:
            raise ConfigError(f"unknown config key '{key}'")
    return TrainConfig(**train_values), model_values


def load_config(path):
    """
    Read a configuration file.

    Args:
        path (str or Path): Flat key-value file

    Returns:
        tuple: (TrainConfig, dict of ModelConfig field values)
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    train_config, model_values = split_config(parse_config_text(path.read_text()))
    logger.debug("Loaded config %s: %s %s", path, train_config, model_values)
    return train_config, model_values
