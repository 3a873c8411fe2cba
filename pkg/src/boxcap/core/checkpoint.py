"""
Checkpoint container for boxcap.

A checkpoint holds everything needed to rebuild a model and continue or reuse
its training: configurations, vocabulary, parameters, optimizer and RNG state.
"""

import logging
from pathlib import Path

import torch
from packaging.version import InvalidVersion, Version

from ..data.vocab import Vocabulary
from ..model.net import BoxCaptioner
from ..utils.errors import CheckpointError
from ..utils.helpers import ensure_directory_exists
from .config import ModelConfig

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "boxcap-checkpoint"
CHECKPOINT_VERSION = "1.0"


def save_checkpoint(
    path,
    model,
    vocab,
    train_config=None,
    step=0,
    stage="pretrain",
    optimizer=None,
    rng=None,
):
    """
    Write a checkpoint.

    Args:
        path (str or Path): Output file
        model (BoxCaptioner): Model to store
        vocab (Vocabulary): Vocabulary the model was built with
        train_config (TrainConfig): Optional training configuration
        step (int): Completed optimizer steps
        stage (str): "pretrain" or "finetune"
        optimizer (torch.optim.Optimizer): Optional optimizer to store
        rng (dict): Optional RNG state

    Returns:
        Path: The written file
    """
    path = Path(path)
    ensure_directory_exists(path.parent)
    container = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "train_config": train_config.to_dict() if train_config is not None else None,
        "vocab": list(vocab.tokens),
        "step": int(step),
        "stage": stage,
        "state_dict": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "rng": rng,
    }
    # Atomic replace
    partial = path.with_name(path.name + ".partial")
    torch.save(container, partial)
    partial.replace(path)
    return path


def _check_version(found):
    try:
        found_version = Version(str(found))
    except InvalidVersion:
        raise CheckpointError(f"checkpoint has an invalid version '{found}'")
    expected = Version(CHECKPOINT_VERSION)
    if found_version.major != expected.major:
        raise CheckpointError(
            f"checkpoint version {found_version} is not compatible with {expected}"
        )


def load_checkpoint(path):
    """
    Read and validate a checkpoint container.

    Args:
        path (str or Path): Checkpoint file

    Returns:
        dict: The container
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        container = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}")
    if not isinstance(container, dict) or container.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a boxcap checkpoint")
    _check_version(container.get("version"))
    return container


def check_shapes(model, state_dict):
    """Raise CheckpointError unless every state_dict entry matches the model."""
    expected = model.state_dict()
    missing = sorted(set(expected) - set(state_dict))
    unexpected = sorted(set(state_dict) - set(expected))
    if missing or unexpected:
        raise CheckpointError(
            f"parameter names differ: missing {missing}, unexpected {unexpected}"
        )
    for name, tensor in expected.items():
        if tuple(state_dict[name].shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"parameter '{name}' has shape {tuple(state_dict[name].shape)}, "
                f"the configuration expects {tuple(tensor.shape)}"
            )


def restore_model(container, **overrides):
    """
    Rebuild the model and vocabulary stored in a checkpoint.

    Args:
        container (dict): Result of load_checkpoint
        **overrides: ModelConfig fields to change, e.g. dropout

    Returns:
        tuple: (BoxCaptioner, Vocabulary)
    """
    values = dict(container["model_config"])
    values.update(overrides)
    config = ModelConfig(**values)
    vocab = Vocabulary(container["vocab"])
    if len(vocab) != config.vocab_size:
        raise CheckpointError(
            f"vocabulary has {len(vocab)} tokens, model expects {config.vocab_size}"
        )
    model = BoxCaptioner(config)
    check_shapes(model, container["state_dict"])
    model.load_state_dict(container["state_dict"])
    logger.debug("Restored model from checkpoint at step %d", container["step"])
    return model, vocab
