"""
Constants for boxcap.

Defines special tokens, sequence segments, layout zones, the category palette and
the other fixed values shared across the package.
"""


class SpecialTokens:
    """Special vocabulary entries. PAD is always id 0."""

    PAD = "[PAD]"
    SOS = "[SOS]"
    EOS = "[EOS]"
    SEP = "[SEP]"
    UNK = "[UNK]"

    @classmethod
    def get_tokens(cls):
        """Get the special tokens in id order."""
        return [cls.PAD, cls.SOS, cls.EOS, cls.SEP, cls.UNK]


class Segments:
    """Segment ids of the multimodal sequence."""

    IMAGE = 0
    LOCATION = 1
    INFO = 2
    CAPTION = 3

    COUNT = 4


class Zones:
    """Layout zones of the synthetic cards, as pixel rows on a 64x64 image."""

    TOP = "top"
    MIDDLE = "middle"
    BOTTOM = "bottom"

    # Band limits as fractions of the image height
    TOP_END = 0.25
    BOTTOM_START = 0.75

    # Allowed y_min pixel rows per zone; one box per row
    ROWS = {
        TOP: (1, 8),
        MIDDLE: (22, 29),
        BOTTOM: (49, 56),
    }

    # Filler tokens padding each zone's captions
    FILLERS = {
        TOP: ("official", "flagship", "store"),
        MIDDLE: ("premium", "quality", "material"),
        BOTTOM: ("limited", "offer", "today"),
    }

    @classmethod
    def get_zones(cls):
        """Get all zones in top-to-bottom order."""
        return [cls.TOP, cls.MIDDLE, cls.BOTTOM]

    @classmethod
    def get_zone_index(cls):
        """Get a zone -> integer label mapping."""
        return {zone: i for i, zone in enumerate(cls.get_zones())}


class Palette:
    """Category colours of the synthetic product region (8-bit RGB)."""

    RED = (220, 60, 50)
    GREEN = (60, 170, 80)
    BLUE = (50, 90, 210)
    ORANGE = (240, 150, 40)

    # Background bands and text strokes
    TOP_BAND = (230, 230, 230)
    MIDDLE_BAND = (245, 245, 245)
    BOTTOM_BAND = (204, 204, 204)
    TEXT_STROKE = (40, 40, 40)

    @classmethod
    def get_palette(cls):
        """Get the category palette - one colour per category id."""
        return [cls.RED, cls.GREEN, cls.BLUE, cls.ORANGE]

    @classmethod
    def get_color_names(cls):
        """Get the caption token naming each category colour."""
        return ["red", "green", "blue", "orange"]


class NeighborModes:
    """Neighbour context variants for the location token."""

    NONE = "none"
    RANDOM2 = "random2"
    TOP1 = "top1"
    TOP2 = "top2"

    @classmethod
    def get_modes(cls):
        """Get all available neighbour modes."""
        return [cls.NONE, cls.RANDOM2, cls.TOP1, cls.TOP2]

    @classmethod
    def context_slots(cls, mode):
        """Number of neighbour boxes fed to the location projection."""
        return 4 if mode == cls.TOP2 else 2


class Tasks:
    """Training tasks."""

    CG = "CG"
    CM = "CM"


class Levels:
    """Caption-matching negative levels, easy to hard."""

    I = "I"  # noqa: E741
    II = "II"
    III = "III"

    FIXED_PROBS = (0.3, 0.4, 0.3)

    @classmethod
    def get_levels(cls):
        """Get all levels in difficulty order."""
        return [cls.I, cls.II, cls.III]


class DataDefaults:
    """Dataset preprocessing defaults."""

    MIN_CAPTION_TOKENS = 2
    MAX_CAPTION_TOKENS = 10
    MIN_ITEMS = 2
    MASK_VALUE = 0.5
    DEDUP_THRESHOLD = 0.9
    IMAGE_SIZE = 64
    BRAND_POOL = 20
    SELLING_POOL = 20
    FEATURE_POOL = 20
