"""
boxcap - captions for text boxes on product images.

Generates a caption for every provided text box of an image from the image,
the box layout and the product information, with a multimodal prefix-LM
transformer trained by caption generation and curriculum caption matching.
"""

__version__ = "1.0.0"

from .core.config import ModelConfig, TrainConfig  # noqa: E402
from .core.inference import CaptionGenerator  # noqa: E402
from .model.net import BoxCaptioner  # noqa: E402

__all__ = ["ModelConfig", "TrainConfig", "CaptionGenerator", "BoxCaptioner"]
