"""
Caption rendering for boxcap.

Draws each caption inside its text box on the unmasked card image, for
qualitative inspection of generated captions.
"""

import logging

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ..data.loader import box_pixel_bounds
from ..utils.constants import Palette

logger = logging.getLogger(__name__)

FONT_NAME = "DejaVuSans.ttf"
FONT_FILL = 0.8  # font size as a fraction of the box short side
LIGHT_TEXT = (255, 255, 255)


def load_font(size):
    """Get a TrueType font of the given pixel size, falling back to Pillow's default."""
    try:
        return ImageFont.truetype(FONT_NAME, size)
    except (OSError, IOError):
        return ImageFont.load_default(size)


def _fit_font(draw, text, width, height):
    size = max(1, int(min(width, height) * FONT_FILL))
    while True:
        font = load_font(size)
        left, top, right, bottom = draw.textbbox((0, 0), text, font=font)
        if (right - left <= width and bottom - top <= height) or size == 1:
            return font, (left, top, right, bottom)
        size -= 1


def _text_color(tile):
    pixels = np.asarray(tile, dtype=np.float64)
    luminance = pixels @ np.array([0.299, 0.587, 0.114])
    return Palette.TEXT_STROKE if luminance.mean() > 127.5 else LIGHT_TEXT


def to_pil(image):
    """HxWx3 float image in [0, 1] as an 8-bit RGB PIL image."""
    array = (np.clip(np.asarray(image), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return Image.fromarray(array)


def render_captions(image, boxes, captions, scale=1):
    """
    Draw captions into their boxes.

    Text is drawn on a tile cut from the box and pasted back, so nothing is
    drawn outside the box rectangles. The font size follows the box short side.

    Args:
        image (numpy.ndarray or PIL.Image.Image): The card image
        boxes (list): TextBoxes
        captions (list): One caption per box; empty leaves the image unchanged
        scale (int): Integer upscaling applied before drawing

    Returns:
        PIL.Image.Image: The rendered image
    """
    canvas = image.copy() if isinstance(image, Image.Image) else to_pil(image)
    canvas = canvas.convert("RGB")
    if scale != 1:
        canvas = canvas.resize(
            (canvas.width * scale, canvas.height * scale), Image.Resampling.NEAREST
        )
    if not captions:
        return canvas
    if len(captions) != len(boxes):
        raise ValueError(f"{len(captions)} captions for {len(boxes)} boxes")

    for box, caption in zip(boxes, captions):
        x0, y0, x1, y1 = box_pixel_bounds(box, canvas.width, canvas.height)
        if x1 <= x0 or y1 <= y0 or not caption:
            continue
        tile = canvas.crop((x0, y0, x1, y1))
        draw = ImageDraw.Draw(tile)
        font, (left, top, right, bottom) = _fit_font(draw, caption, x1 - x0, y1 - y0)
        # Centre the text in the tile
        x = (tile.width - (right - left)) / 2 - left
        y = (tile.height - (bottom - top)) / 2 - top
        draw.text((x, y), caption, font=font, fill=_text_color(tile))
        canvas.paste(tile, (x0, y0))
    return canvas
