"""
Dataset loading and preprocessing for boxcap.

Reads and writes the line-delimited card schema and implements the corpus
cleaning steps: caption length filter, overlap de-duplication and text pixel
masking.
"""

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..utils.constants import DataDefaults
from ..utils.errors import DatasetError
from ..utils.helpers import ensure_directory_exists, read_jsonl, write_jsonl
from .cards import Card, DatasetSplit, TextBox
from .vocab import tokenize

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("image", "width", "height", "info", "category", "boxes", "captions")


def caption_length(caption):
    """Number of tokens of a caption."""
    return len(tokenize(caption))


def _caption_length_ok(caption):
    n = caption_length(caption)
    return DataDefaults.MIN_CAPTION_TOKENS <= n <= DataDefaults.MAX_CAPTION_TOKENS


def _read_image(value, base_dir, line_no):
    if isinstance(value, str):
        path = Path(value)
        if not path.is_absolute():
            path = base_dir / path
        try:
            with Image.open(path) as img:
                array = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
        except (OSError, ValueError) as e:
            raise DatasetError(f"cannot read image {path}: {e}", line_no, "image")
        return array
    try:
        array = np.asarray(value, dtype=np.float32)
    except (TypeError, ValueError) as e:
        raise DatasetError(f"inline image is not numeric: {e}", line_no, "image")
    if array.ndim != 3 or array.shape[2] != 3:
        raise DatasetError(
            f"inline image must be HxWx3, got shape {array.shape}", line_no, "image"
        )
    if not np.all(np.isfinite(array)) or array.min() < 0.0 or array.max() > 1.0:
        raise DatasetError("inline image values must lie in [0, 1]", line_no, "image")
    return array


def validate_card(card, line_no=None):
    """
    Check the Card invariants that load_dataset enforces in strict mode.

    Args:
        card (Card): Card to check
        line_no (int): Line number for error messages

    Raises:
        DatasetError: On the first violated invariant
    """
    for i, caption in enumerate(card.captions):
        n = caption_length(caption)
        if not _caption_length_ok(caption):
            raise DatasetError(
                f"caption '{caption}' has {n} tokens; the caption length filter keeps "
                f"{DataDefaults.MIN_CAPTION_TOKENS}-{DataDefaults.MAX_CAPTION_TOKENS}",
                line_no,
                f"captions[{i}]",
            )
    if len(card.items) < DataDefaults.MIN_ITEMS:
        raise DatasetError(
            f"card needs at least {DataDefaults.MIN_ITEMS} captions, "
            f"has {len(card.items)}",
            line_no,
            "captions",
        )
    if len(set(card.boxes)) != len(card.boxes):
        raise DatasetError("boxes must be pairwise distinct", line_no, "boxes")


def parse_record(line, line_no, base_dir, strict=True):
    """
    Parse one dataset line into a Card.

    Args:
        line (str): Raw JSON line
        line_no (int): 1-based line number
        base_dir (Path): Directory relative image paths are resolved against
        strict (bool): Enforce caption-length and item-count invariants

    Returns:
        Card: The parsed card
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetError(f"malformed JSON: {e.msg}", line_no)
    if not isinstance(record, dict):
        raise DatasetError("record must be a JSON object", line_no)

    for name in REQUIRED_FIELDS:
        if name not in record:
            raise DatasetError("missing field", line_no, name)

    info = record["info"]
    if not isinstance(info, str):
        raise DatasetError("must be a string", line_no, "info")
    category = record["category"]
    if isinstance(category, bool) or not isinstance(category, int):
        raise DatasetError("must be an integer", line_no, "category")
    boxes = record["boxes"]
    captions = record["captions"]
    if not isinstance(boxes, list):
        raise DatasetError("must be a list of boxes", line_no, "boxes")
    if not isinstance(captions, list) or not all(isinstance(c, str) for c in captions):
        raise DatasetError("must be a list of strings", line_no, "captions")
    if len(boxes) != len(captions):
        raise DatasetError(
            f"{len(boxes)} boxes but {len(captions)} captions", line_no, "captions"
        )

    parsed_boxes = []
    for i, values in enumerate(boxes):
        if not isinstance(values, list):
            raise DatasetError("box must be a list", line_no, f"boxes[{i}]")
        try:
            parsed_boxes.append(TextBox.from_list(values))
        except (DatasetError, TypeError, ValueError) as e:
            raise DatasetError(str(e), line_no, f"boxes[{i}]")

    image = _read_image(record["image"], base_dir, line_no)
    height, width = image.shape[:2]
    if (record["width"], record["height"]) != (width, height):
        raise DatasetError(
            f"declared size {record['width']}x{record['height']} does not match "
            f"image {width}x{height}",
            line_no,
            "width",
        )

    card = Card(
        image=image,
        info=info,
        items=list(zip(parsed_boxes, captions)),
        category=category,
        card_id=str(record.get("id", line_no - 1)),
    )
    if strict:
        validate_card(card, line_no)
    return card


def load_dataset(path, split="train", strict=True):
    """
    Load a line-delimited dataset file.

    Args:
        path (str or Path): Dataset file
        split (str): Split tag of the returned DatasetSplit
        strict (bool): Enforce caption-length and item-count invariants

    Returns:
        DatasetSplit: Validated cards

    Raises:
        DatasetError: For a missing file or the first invalid record
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    base_dir = path.parent
    cards = [
        parse_record(line, line_no, base_dir, strict)
        for line_no, line in read_jsonl(path)
    ]
    logger.info("Loaded %d cards from %s", len(cards), path)
    return DatasetSplit(cards=cards, split=split)


def _to_uint8(image):
    return (np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def card_to_record(card, image_ref):
    """Schema record of a card; image_ref is a relative PNG path or None for inline."""
    image = image_ref if image_ref is not None else card.image.tolist()
    return {
        "id": card.card_id,
        "image": image,
        "width": card.width,
        "height": card.height,
        "info": card.info,
        "category": card.category,
        "boxes": [box.as_list() for box in card.boxes],
        "captions": card.captions,
    }


def save_dataset(split, path, inline=False):
    """
    Write a split in the line-delimited schema.

    Images go to PNG files in ``<stem>_images/`` next to the dataset file unless
    ``inline`` is set.

    Args:
        split (DatasetSplit): Cards to write
        path (str or Path): Output dataset file
        inline (bool): Embed images as nested arrays

    Returns:
        Path: The dataset file
    """
    path = Path(path)
    ensure_directory_exists(path.parent)
    records = []
    image_dir = path.parent / f"{path.stem}_images"
    if not inline:
        ensure_directory_exists(image_dir)
    for index, card in enumerate(split.cards):
        if inline:
            records.append(card_to_record(card, None))
            continue
        name = f"{index:06d}.png"
        Image.fromarray(_to_uint8(card.image)).save(image_dir / name)
        records.append(card_to_record(card, f"{image_dir.name}/{name}"))
    write_jsonl(path, records)
    logger.info("Wrote %d cards to %s", len(records), path)
    return path


def filter_captions(cards):
    """
    Apply the caption length filter.

    Captions outside 2-10 tokens are removed; cards left with fewer than two
    captions are dropped.

    Args:
        cards (iterable): Cards to filter

    Returns:
        list: Filtered cards
    """
    kept = []
    for card in cards:
        items = [(box, cap) for box, cap in card.items if _caption_length_ok(cap)]
        if len(items) >= DataDefaults.MIN_ITEMS:
            kept.append(card.with_items(items))
    return kept


def dedup_cards(cards, overlap_threshold=DataDefaults.DEDUP_THRESHOLD):
    """
    Remove cards whose captions overlap an earlier card too much.

    The overlap of two cards is the number of shared caption strings over the
    smaller count of distinct captions; a card is dropped when its overlap with
    any earlier retained card reaches the threshold.

    Args:
        cards (iterable): Cards in priority order
        overlap_threshold (float): Fraction in (0, 1]

    Returns:
        list: Retained cards, a subsequence of the input
    """
    if not 0.0 < overlap_threshold <= 1.0:
        raise ValueError(
            f"overlap_threshold must be in (0, 1], got {overlap_threshold}"
        )

    kept = []
    distinct = []
    # caption string -> indices into kept
    owners = defaultdict(list)
    for card in cards:
        captions = set(card.captions)
        shared = Counter()
        for caption in captions:
            for owner in owners[caption]:
                shared[owner] += 1
        duplicate = any(
            count / min(distinct[owner], len(captions)) >= overlap_threshold
            for owner, count in shared.items()
        )
        if duplicate:
            continue
        for caption in captions:
            owners[caption].append(len(kept))
        kept.append(card)
        distinct.append(len(captions))
    return kept


def box_pixel_bounds(box, width, height):
    """Pixel rectangle (x0, y0, x1, y1) of a box, edges rounded to the grid."""

    def to_px(value, size):
        return int(math.floor(value * size + 0.5))

    return (
        to_px(box.x_min, width),
        to_px(box.y_min, height),
        to_px(box.x_max, width),
        to_px(box.y_max, height),
    )


def mask_text_pixels(image, boxes, value=DataDefaults.MASK_VALUE):
    """
    Paint every pixel inside any box with the mask value.

    Args:
        image (numpy.ndarray): HxWxC image
        boxes (iterable): TextBoxes
        value (float): Fill value

    Returns:
        numpy.ndarray: A masked copy
    """
    masked = np.array(image, copy=True)
    height, width = masked.shape[:2]
    for box in boxes:
        x0, y0, x1, y1 = box_pixel_bounds(box, width, height)
        masked[y0:y1, x0:x1] = value
    return masked


@dataclass
class DatasetStats:
    """Caption length and captions-per-image histograms with their means."""

    length_histogram: dict
    captions_per_image_histogram: dict
    mean_length: float
    mean_captions_per_image: float


def dataset_stats(cards):
    """
    Compute the caption-length and captions-per-image distributions.

    Args:
        cards (iterable): Nonempty collection of cards

    Returns:
        DatasetStats: Histograms and means
    """
    cards = list(cards)
    if not cards:
        raise DatasetError("cannot compute statistics of an empty corpus")
    lengths = Counter()
    per_image = Counter()
    for card in cards:
        per_image[len(card.items)] += 1
        for caption in card.captions:
            lengths[caption_length(caption)] += 1

    n_captions = sum(lengths.values())
    mean_length = sum(k * v for k, v in lengths.items()) / max(n_captions, 1)
    mean_per_image = sum(k * v for k, v in per_image.items()) / len(cards)
    return DatasetStats(
        length_histogram=dict(sorted(lengths.items())),
        captions_per_image_histogram=dict(sorted(per_image.items())),
        mean_length=mean_length,
        mean_captions_per_image=mean_per_image,
    )
