"""
Batch assembly for boxcap.

Turns (card, box, caption) samples into the padded tensors the transformer
consumes. Images are masked at every text box before encoding.
"""

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
import torch

from ..data.loader import mask_text_pixels
from .encoders import neighbor_context


@dataclass
class Sample:
    """One training or inference example: a box of a card and a candidate caption."""

    card: object
    box_index: int
    caption: Optional[str] = None  # None means the ground truth
    label: float = 1.0
    level: Optional[str] = None

    @property
    def text(self):
        if self.caption is None:
            return self.card.captions[self.box_index]
        return self.caption


@dataclass
class MultimodalBatch:
    """
    Padded model inputs.

    The caption segment is [SOS, y_1, ..., y_n] and the targets are
    [y_1, ..., y_n, EOS], both padded to the same length.
    """

    images: torch.Tensor  # B x 3 x H x W
    location: torch.Tensor  # B x 4
    neighbors: torch.Tensor  # B x S x 4
    neighbors_present: torch.Tensor  # B x S
    info_ids: torch.Tensor  # B x K
    info_valid: torch.Tensor  # B x K
    caption_ids: torch.Tensor  # B x T
    caption_valid: torch.Tensor  # B x T
    targets: torch.Tensor  # B x T
    target_mask: torch.Tensor  # B x T
    labels: torch.Tensor  # B

    def __len__(self):
        return int(self.images.shape[0])

    def to(self, device):
        return MultimodalBatch(
            **{f.name: getattr(self, f.name).to(device) for f in fields(self)}
        )

    def index_select(self, order):
        """Reorder samples; ``order`` is a sequence of indices."""
        index = torch.as_tensor(order, dtype=torch.long)
        return MultimodalBatch(
            **{f.name: getattr(self, f.name)[index] for f in fields(self)}
        )


class BatchBuilder:
    """
    Builds MultimodalBatches for one model configuration and vocabulary.

    Masked images, encoded info and neighbour grid rows are cached per card.
    """

    def __init__(self, vocab, config):
        """
        Initialize the builder.

        Args:
            vocab (Vocabulary): Shared text codec
            config (ModelConfig): Model shape settings
        """
        self.vocab = vocab
        self.config = config
        self._cards = {}
        self._locations = {}

    def _card_entry(self, card):
        # Cards without an id are not cached
        key = (card.card_id, tuple(card.boxes)) if card.card_id else None
        entry = self._cards.get(key) if key else None
        if entry is None:
            masked = mask_text_pixels(card.image, card.boxes)
            image = torch.from_numpy(np.ascontiguousarray(masked.transpose(2, 0, 1)))
            info = self.vocab.encode(card.info)[: self.config.max_info_len]
            entry = (image.float(), info)
            if key:
                self._cards[key] = entry
        return entry

    def _location_entry(self, card, box_index):
        key = (tuple(card.boxes), box_index)
        entry = self._locations.get(key)
        if entry is None:
            entry = neighbor_context(
                card.boxes, box_index, self.config.grid, self.config.neighbor_mode
            )
            self._locations[key] = entry
        return entry

    def encode_caption(self, text):
        """Caption ids, truncated so that SOS + caption fits max_caption_len."""
        return self.vocab.encode(text)[: self.config.max_caption_len - 1]

    def build(self, samples):
        """
        Assemble a batch.

        Args:
            samples (list): Sample objects

        Returns:
            MultimodalBatch: Padded tensors
        """
        cfg = self.config
        vocab = self.vocab
        size = len(samples)
        length = cfg.max_caption_len

        images, infos, locations, neighbors, present = [], [], [], [], []
        captions = []
        for sample in samples:
            image, info = self._card_entry(sample.card)
            current, rows, flags = self._location_entry(sample.card, sample.box_index)
            images.append(image)
            infos.append(info)
            locations.append(current)
            neighbors.append(rows)
            present.append(flags)
            captions.append(self.encode_caption(sample.text))

        info_ids = torch.full((size, cfg.max_info_len), vocab.pad_id, dtype=torch.long)
        info_valid = torch.zeros(size, cfg.max_info_len, dtype=torch.bool)
        caption_ids = torch.full((size, length), vocab.pad_id, dtype=torch.long)
        targets = torch.full((size, length), vocab.pad_id, dtype=torch.long)
        caption_valid = torch.zeros(size, length, dtype=torch.bool)
        for row, (info, caption) in enumerate(zip(infos, captions)):
            if info:
                info_ids[row, : len(info)] = torch.tensor(info)
                info_valid[row, : len(info)] = True
            n = len(caption)
            caption_ids[row, 0] = vocab.sos_id
            if n:
                caption_ids[row, 1 : n + 1] = torch.tensor(caption)
                targets[row, :n] = torch.tensor(caption)
            targets[row, n] = vocab.eos_id
            caption_valid[row, : n + 1] = True

        return MultimodalBatch(
            images=torch.stack(images),
            location=torch.tensor(locations, dtype=torch.long),
            neighbors=torch.tensor(neighbors, dtype=torch.long),
            neighbors_present=torch.tensor(present, dtype=torch.bool),
            info_ids=info_ids,
            info_valid=info_valid,
            caption_ids=caption_ids,
            caption_valid=caption_valid,
            targets=targets,
            target_mask=caption_valid.clone(),
            labels=torch.tensor([float(s.label) for s in samples], dtype=torch.float32),
        )

    def context_batch(self, card, box_indices):
        """Batch holding only SOS captions, for decoding the given boxes."""
        samples = [Sample(card, i, caption="") for i in box_indices]
        return self.build(samples)
