"""
Shared fixtures for the boxcap tests.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the src directory to the path so we can import modules
src_dir = Path(__file__).parent / "src"
sys.path.insert(0, str(src_dir))

from boxcap.core.config import ModelConfig, TrainConfig  # noqa: E402
from boxcap.data.cards import Card, TextBox  # noqa: E402
from boxcap.data.synth import synth_cards  # noqa: E402
from boxcap.data.vocab import build_vocab  # noqa: E402
from boxcap.model.net import BoxCaptioner  # noqa: E402
from boxcap.utils.helpers import seed_everything  # noqa: E402


def make_card(captions, boxes=None, info="brand01 [SEP] sell01", card_id="", size=8):
    """Small hand-made card; boxes default to a diagonal layout."""
    if boxes is None:
        step = 1.0 / len(captions)
        boxes = [
            TextBox(i * step, i * step, (i + 1) * step, (i + 1) * step)
            for i in range(len(captions))
        ]
    return Card(
        image=np.full((size, size, 3), 0.25, dtype=np.float32),
        info=info,
        items=list(zip(boxes, captions)),
        category=0,
        card_id=card_id,
    )


def tiny_model_config(vocab_size, **overrides):
    values = {
        "layers": 1,
        "width": 16,
        "heads": 2,
        "grid": 4,
        "vocab_size": vocab_size,
        "dropout": 0.0,
        "backbone_channels": 4,
    }
    values.update(overrides)
    return ModelConfig(**values)


def tiny_train_config(**overrides):
    values = {
        "total_steps": 8,
        "batch_size": 4,
        "learning_rate": 1e-3,
        "seed": 3,
        "warmup_steps": 2,
        "log_every": 4,
    }
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def cards():
    """Six synthetic training cards."""
    return synth_cards(6, seed=3).cards


@pytest.fixture
def vocab(cards):
    return build_vocab(cards)


@pytest.fixture
def model(vocab):
    """Untrained single-layer model without dropout."""
    seed_everything(0)
    model = BoxCaptioner(tiny_model_config(len(vocab)))
    model.eval()
    return model
