"""
Card data types for boxcap.

A Card is one sample: an image, its product info text, and the ordered list of
(text box, caption) pairs to be generated on it.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..utils.errors import DatasetError

SPLITS = ("train", "valid", "test")


@dataclass(frozen=True)
class TextBox:
    """
    Normalized text box rectangle.

    Coordinates are fractions of the image width/height with
    0 <= x_min < x_max <= 1 and 0 <= y_min < y_max <= 1.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        values = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
            raise DatasetError(f"box coordinates must be finite numbers: {values}")
        if not (0.0 <= self.x_min < self.x_max <= 1.0):
            raise DatasetError(
                f"box x range [{self.x_min}, {self.x_max}] outside [0, 1] or empty"
            )
        if not (0.0 <= self.y_min < self.y_max <= 1.0):
            raise DatasetError(
                f"box y range [{self.y_min}, {self.y_max}] outside [0, 1] or empty"
            )

    @classmethod
    def from_list(cls, values):
        """Create a box from [x_min, y_min, x_max, y_max]."""
        if len(values) != 4:
            raise DatasetError(f"box needs 4 coordinates, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_list(self):
        """Get [x_min, y_min, x_max, y_max]."""
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def center(self):
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def top_left_sum(self):
        """x_min + y_min, the layout order key."""
        return self.x_min + self.y_min

    @property
    def aspect_ratio(self):
        """Long side over short side, >= 1 by definition."""
        return self.aspect_ratio_on(1, 1)

    def aspect_ratio_on(self, width, height):
        """
        Aspect ratio measured in pixels of an image.

        Args:
            width (int): Image width in pixels
            height (int): Image height in pixels

        Returns:
            float: Long side over short side
        """
        w = self.width * width
        h = self.height * height
        return max(w, h) / min(w, h)


@dataclass
class Card:
    """One sample: image bitmap, product info, ordered (box, caption) items."""

    image: np.ndarray
    info: str
    items: list
    category: int
    card_id: str = ""

    @property
    def boxes(self):
        return [box for box, _ in self.items]

    @property
    def captions(self):
        return [caption for _, caption in self.items]

    @property
    def height(self):
        return int(self.image.shape[0])

    @property
    def width(self):
        return int(self.image.shape[1])

    def __len__(self):
        return len(self.items)

    def with_items(self, items):
        """Copy of the card with a different item list."""
        return Card(
            image=self.image,
            info=self.info,
            items=list(items),
            category=self.category,
            card_id=self.card_id,
        )


@dataclass
class DatasetSplit:
    """A list of cards tagged with its split."""

    cards: list = field(default_factory=list)
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DatasetError(
                f"unknown split '{self.split}', expected one of {SPLITS}"
            )

    def __len__(self):
        return len(self.cards)

    def __iter__(self):
        return iter(self.cards)

    def __getitem__(self, index):
        return self.cards[index]

    def by_id(self):
        """Map card id -> card."""
        return {card.card_id: card for card in self.cards}
