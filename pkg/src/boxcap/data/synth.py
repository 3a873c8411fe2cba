"""
Synthetic card generator for boxcap.

Generates product cards whose captions follow fixed rules, so the expected
caption of every box can be re-derived from the card alone:

- boxes in the top band carry brand captions, boxes in the middle band overlap
  the product region's columns and carry feature captions keyed by the product
  colour, boxes in the bottom band carry selling-point captions;
- two boxes in one zone take the first and second list entries in ascending
  top-left-sum order;
- a caption has clamp(round(aspect ratio), 2, 10) tokens: one head token and
  the zone's filler tokens.
"""

import logging
import math

import numpy as np

from ..utils.constants import DataDefaults, Palette, SpecialTokens, Zones
from .cards import SPLITS, Card, DatasetSplit, TextBox

logger = logging.getLogger(__name__)

MAX_LAYOUT_ATTEMPTS = 1000
PARTNER_OFFSET_PX = 6


def box_zone(box):
    """Zone of a box, decided by its vertical centre."""
    center_y = box.center[1]
    if center_y < Zones.TOP_END:
        return Zones.TOP
    if center_y >= Zones.BOTTOM_START:
        return Zones.BOTTOM
    return Zones.MIDDLE


def caption_token_count(aspect_ratio):
    """clamp(round(aspect_ratio), 2, 10), rounding halves up."""
    rounded = int(math.floor(aspect_ratio + 0.5))
    low, high = DataDefaults.MIN_CAPTION_TOKENS, DataDefaults.MAX_CAPTION_TOKENS
    return min(max(rounded, low), high)


def zone_ranks(boxes):
    """
    Rank of every box inside its zone.

    Boxes of one zone are ordered by ascending top-left sum, ties by list index.

    Args:
        boxes (list): TextBoxes of a card

    Returns:
        list: (zone, rank) per box
    """
    zones = [box_zone(box) for box in boxes]
    ranks = [0] * len(boxes)
    for zone in Zones.get_zones():
        members = [i for i, z in enumerate(zones) if z == zone]
        members.sort(key=lambda i: (boxes[i].top_left_sum, i))
        for rank, i in enumerate(members):
            ranks[i] = rank
    return list(zip(zones, ranks))


def ordered_list_mask(card):
    """True for boxes that share their zone with another box."""
    zones = [box_zone(box) for box in card.boxes]
    return [zones.count(zone) > 1 for zone in zones]


def parse_info(info):
    """
    Split synthetic product info into its attribute lists.

    Args:
        info (str): "cat<k> <brands> [SEP] <selling points> <features>"

    Returns:
        dict: Lists under "brands", "selling", "features"
    """
    tokens = info.split()
    sep = len(tokens)
    if SpecialTokens.SEP in tokens:
        sep = tokens.index(SpecialTokens.SEP)
    title, attributes = tokens[1:sep], tokens[sep + 1 :]
    return {
        "brands": title,
        "selling": [t for t in attributes if t.startswith("sell")],
        "features": [t for t in attributes if t.startswith("feat")],
    }


def product_color_name(image):
    """Name of the palette colour covering most pixels of the image."""
    pixels = np.asarray(image, dtype=np.float64) * 255.0
    pixels = np.floor(pixels + 0.5).astype(np.int64)
    counts = [
        int(np.all(pixels == np.asarray(color), axis=-1).sum())
        for color in Palette.get_palette()
    ]
    return Palette.get_color_names()[int(np.argmax(counts))]


def oracle_captions(boxes, info, image):
    """
    Derive the ground-truth captions of a synthetic card.

    Args:
        boxes (list): TextBoxes in card order
        info (str): Product info string
        image (numpy.ndarray): Card image, used for the product colour

    Returns:
        list: One caption per box
    """
    lists = parse_info(info)
    color = product_color_name(image)
    fillers = Zones.FILLERS
    captions = []
    for box, (zone, rank) in zip(boxes, zone_ranks(boxes)):
        if zone == Zones.TOP:
            head = lists["brands"][rank]
        elif zone == Zones.MIDDLE:
            head = f"{color}_{lists['features'][rank]}"
        else:
            head = lists["selling"][rank]
        n_tokens = caption_token_count(box.aspect_ratio)
        tail = [fillers[zone][j % len(fillers[zone])] for j in range(n_tokens - 1)]
        captions.append(" ".join([head] + tail))
    return captions


def _sample_region(rng):
    """Product region columns [x0, x1) in pixels."""
    x0 = int(rng.integers(4, 29))
    return x0, x0 + int(rng.integers(20, 33))


def _sample_box(rng, y_px, center_hint=None, columns=None):
    """
    Sample (x, y, w, h) pixels in one row.

    With a centre hint the box centre stays within reach of it; with columns
    [x0, x1) the box overlaps them horizontally.
    """
    size = DataDefaults.IMAGE_SIZE
    for _ in range(MAX_LAYOUT_ATTEMPTS):
        h = int(rng.integers(3, 7))
        m = int(rng.integers(2, min(10, size // h) + 1))
        w = m * h
        lo, hi = 0, size - w
        if center_hint is not None:
            lo = max(lo, math.ceil(center_hint - PARTNER_OFFSET_PX - w / 2))
            hi = min(hi, math.floor(center_hint + PARTNER_OFFSET_PX - w / 2))
        if columns is not None:
            lo = max(lo, columns[0] - w + 1)
            hi = min(hi, columns[1] - 1)
        if lo <= hi:
            return int(rng.integers(lo, hi + 1)), y_px, w, h
    raise RuntimeError(f"could not place a box in pixel row {y_px}")


def _sample_layout(rng, region):
    size = DataDefaults.IMAGE_SIZE
    n_boxes = int(rng.integers(3, 7))
    slots = [zone for zone in Zones.get_zones() for _ in range(2)]
    chosen = sorted(rng.choice(len(slots), size=n_boxes, replace=False).tolist())
    counts = {
        zone: sum(1 for i in chosen if slots[i] == zone) for zone in Zones.get_zones()
    }

    for _ in range(MAX_LAYOUT_ATTEMPTS):
        rects = []
        for zone in Zones.get_zones():
            rows = Zones.ROWS[zone]
            columns = region if zone == Zones.MIDDLE else None
            if counts[zone] == 1:
                row = rows[int(rng.integers(2))]
                rects.append(_sample_box(rng, row, columns=columns))
            elif counts[zone] == 2:
                first = _sample_box(rng, rows[0], columns=columns)
                rects.append(first)
                hint = first[0] + first[2] / 2
                rects.append(_sample_box(rng, rows[1], hint, columns))
        sums = [x + y for x, y, _, _ in rects]
        if len(set(sums)) == len(sums):
            order = rng.permutation(len(rects))
            return [rects[i] for i in order]
    raise RuntimeError(f"no layout with distinct top-left sums for image size {size}")


def _paint_image(category, rects, region):
    size = DataDefaults.IMAGE_SIZE
    top_end = int(size * Zones.TOP_END)
    bottom_start = int(size * Zones.BOTTOM_START)

    pixels = np.zeros((size, size, 3), dtype=np.uint8)
    pixels[:top_end] = Palette.TOP_BAND
    pixels[top_end:bottom_start] = Palette.MIDDLE_BAND
    pixels[bottom_start:] = Palette.BOTTOM_BAND

    # Product region
    x0, x1 = region
    pixels[top_end + 2 : bottom_start - 2, x0:x1] = Palette.get_palette()[category]

    # Text strokes on alternate rows of every box
    for x, y, w, h in rects:
        pixels[y : y + h : 2, x : x + w] = Palette.TEXT_STROKE

    return pixels.astype(np.float32) / 255.0


def _make_card(rng, card_id):
    size = DataDefaults.IMAGE_SIZE
    n_colors = len(Palette.get_palette())
    category = int(rng.integers(n_colors))
    brands = rng.choice(DataDefaults.BRAND_POOL, size=2, replace=False)
    selling = rng.choice(DataDefaults.SELLING_POOL, size=2, replace=False)
    features = rng.choice(DataDefaults.FEATURE_POOL, size=2, replace=False)
    info = " ".join(
        [f"cat{category}"]
        + [f"brand{int(b):02d}" for b in brands]
        + [SpecialTokens.SEP]
        + [f"sell{int(s):02d}" for s in selling]
        + [f"feat{int(f):02d}" for f in features]
    )

    region = _sample_region(rng)
    rects = _sample_layout(rng, region)
    image = _paint_image(category, rects, region)
    boxes = [
        TextBox(x / size, y / size, (x + w) / size, (y + h) / size)
        for x, y, w, h in rects
    ]
    captions = oracle_captions(boxes, info, image)
    return Card(
        image=image,
        info=info,
        items=list(zip(boxes, captions)),
        category=category,
        card_id=card_id,
    )


def synth_cards(n, seed, split="train"):
    """
    Generate a deterministic synthetic split.

    Card i is drawn from its own stream seeded by (seed, split index, i), so the
    result is a pure function of the arguments and can be generated in shards.

    Args:
        n (int): Number of cards, at least 1
        seed (int): Seed
        split (str): Split tag; also selects an independent stream

    Returns:
        DatasetSplit: The generated cards
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    stream = SPLITS.index(split)
    cards = [
        _make_card(np.random.default_rng([seed, stream, i]), f"{split}-{seed}-{i:05d}")
        for i in range(n)
    ]
    logger.debug("Generated %d synthetic %s cards (seed %d)", n, split, seed)
    return DatasetSplit(cards=cards, split=split)


def synth_splits(n_train, n_valid, n_test, seed):
    """Disjoint train/valid/test synthetic splits from one seed."""
    return {
        "train": synth_cards(n_train, seed, "train"),
        "valid": synth_cards(n_valid, seed, "valid"),
        "test": synth_cards(n_test, seed, "test"),
    }
