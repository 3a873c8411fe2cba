"""
Caption generation for boxcap.

Decodes captions box by box from [SOS], conditioned on the masked image, the
box location with its neighbours taken from the complete layout, and the
product info.
"""

import json
import logging

import torch
import torch.nn.functional as F

from ..data.cards import TextBox
from ..model.batching import BatchBuilder
from ..utils.constants import DataDefaults
from ..utils.errors import DatasetError
from ..utils.helpers import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)


class CaptionGenerator:
    """
    Greedy and beam-search decoding with a trained model.

    Args:
        model (BoxCaptioner): Trained model
        vocab (Vocabulary): Its vocabulary
        max_len (int): Maximum caption tokens, EOS excluded
        beam (int): Beam width; 1 decodes greedily
    """

    def __init__(self, model, vocab, max_len=DataDefaults.MAX_CAPTION_TOKENS, beam=1):
        limit = model.config.max_caption_len - 1
        if not 1 <= max_len <= limit:
            raise ValueError(f"max_len must be in [1, {limit}], got {max_len}")
        if beam < 1:
            raise ValueError(f"beam width must be at least 1, got {beam}")
        self.model = model
        self.vocab = vocab
        self.max_len = max_len
        self.beam = beam
        self.builder = BatchBuilder(vocab, model.config)
        self._suppressed = sorted(vocab.special_ids - {vocab.eos_id})

    def _log_probs(self, context, context_valid, prefix, step):
        valid = torch.ones_like(prefix, dtype=torch.bool)
        output = self.model.decode(context, context_valid, prefix, valid)
        log_probs = F.log_softmax(output.logits[:, step], dim=-1)
        # EOS is the only special token that may be generated
        log_probs[:, self._suppressed] = float("-inf")
        if step == 0:
            # At least one token before EOS
            log_probs[:, self.vocab.eos_id] = float("-inf")
        return log_probs

    def _greedy(self, batch):
        context, context_valid = self.model.encode_context(batch)
        size = context.shape[0]
        prefix = torch.full((size, 1), self.vocab.sos_id, dtype=torch.long)
        tokens = [[] for _ in range(size)]
        done = [False] * size
        for step in range(self.max_len):
            chosen = self._log_probs(context, context_valid, prefix, step).argmax(-1)
            for row, token_id in enumerate(chosen.tolist()):
                if done[row]:
                    continue
                if token_id == self.vocab.eos_id:
                    done[row] = True
                else:
                    tokens[row].append(token_id)
            if all(done):
                break
            prefix = torch.cat([prefix, chosen.unsqueeze(1)], dim=1)
        return tokens

    def _beam_search(self, batch):
        context, context_valid = self.model.encode_context(batch)
        alive = [([], 0.0)]
        finished = []
        for step in range(self.max_len):
            prefix = torch.tensor(
                [[self.vocab.sos_id] + ids for ids, _ in alive], dtype=torch.long
            )
            count = len(alive)
            log_probs = self._log_probs(
                context.expand(count, -1, -1),
                context_valid.expand(count, -1),
                prefix,
                step,
            )
            width = min(self.beam, log_probs.shape[-1])
            top_values, top_ids = log_probs.topk(width, dim=-1)
            candidates = []
            for row, (ids, score) in enumerate(alive):
                values, token_ids = top_values[row].tolist(), top_ids[row].tolist()
                for value, token_id in zip(values, token_ids):
                    if value == float("-inf"):
                        continue
                    candidates.append((score + value, ids, token_id))
            candidates.sort(key=lambda c: -c[0])

            alive = []
            for score, ids, token_id in candidates[: self.beam]:
                if token_id == self.vocab.eos_id:
                    finished.append((score / (len(ids) + 1), ids))
                else:
                    alive.append((ids + [token_id], score))
            if not alive:
                break
        finished.extend((score / len(ids), ids) for ids, score in alive)
        # Highest mean log-probability; ties keep the earliest finisher
        best = max(range(len(finished)), key=lambda i: (finished[i][0], -i))
        return finished[best][1]

    def _decode(self, token_ids):
        return self.vocab.decode(token_ids, skip_special=True)

    @torch.no_grad()
    def generate(self, card, box_index):
        """
        Caption one box of a card.

        Args:
            card (Card): Card with its complete box layout
            box_index (int): Box to caption

        Returns:
            str: Generated caption
        """
        if not 0 <= box_index < len(card.items):
            raise IndexError(
                f"box index {box_index} out of range for {len(card.items)} boxes"
            )
        self.model.eval()
        batch = self.builder.context_batch(card, [box_index])
        if self.beam == 1:
            return self._decode(self._greedy(batch)[0])
        return self._decode(self._beam_search(batch))

    @torch.no_grad()
    def generate_card(self, card):
        """
        Caption every box of a card.

        Returns:
            list: Captions aligned with card.boxes
        """
        self.model.eval()
        indices = list(range(len(card.items)))
        if self.beam == 1:
            batch = self.builder.context_batch(card, indices)
            return [self._decode(ids) for ids in self._greedy(batch)]
        return [
            self._decode(self._beam_search(self.builder.context_batch(card, [i])))
            for i in indices
        ]

    def predict(self, cards):
        """
        Prediction records for a collection of cards, one per box.

        Returns:
            list: Dictionaries {id, box_index, box, caption}
        """
        records = []
        for card in cards:
            for index, caption in enumerate(self.generate_card(card)):
                records.append(
                    {
                        "id": card.card_id,
                        "box_index": index,
                        "box": card.boxes[index].as_list(),
                        "caption": caption,
                    }
                )
        return records


def generate(
    model, vocab, card, box_index, max_len=DataDefaults.MAX_CAPTION_TOKENS, beam=1
):
    """Caption one box; see CaptionGenerator.generate."""
    return CaptionGenerator(model, vocab, max_len, beam).generate(card, box_index)


def generate_card(model, vocab, card, max_len=DataDefaults.MAX_CAPTION_TOKENS, beam=1):
    """Caption every box of a card; see CaptionGenerator.generate_card."""
    return CaptionGenerator(model, vocab, max_len, beam).generate_card(card)


def write_predictions(path, records):
    """Write prediction records as line-delimited JSON; returns the record count."""
    return write_jsonl(path, records)


def read_predictions(path):
    """
    Read a prediction file.

    Args:
        path (str or Path): File written by write_predictions

    Returns:
        dict: card id -> {box index: (TextBox, caption)}
    """
    predictions = {}
    for line_no, line in read_jsonl(path):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetError(f"invalid JSON: {e.msg}", line_no)
        for name in ("id", "box_index", "box", "caption"):
            if name not in record:
                raise DatasetError("missing field", line_no, name)
        try:
            box = TextBox.from_list(record["box"])
        except (TypeError, ValueError, DatasetError):
            raise DatasetError("box must be a list of 4 numbers", line_no, "box")
        try:
            index = int(record["box_index"])
        except (TypeError, ValueError):
            raise DatasetError("box_index must be an integer", line_no, "box_index")
        card_boxes = predictions.setdefault(str(record["id"]), {})
        if index in card_boxes:
            raise DatasetError(
                f"duplicate prediction for box {index}", line_no, "box_index"
            )
        card_boxes[index] = (box, str(record["caption"]))
    logger.debug("Read predictions for %d cards from %s", len(predictions), path)
    return predictions
