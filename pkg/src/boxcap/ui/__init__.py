"""
User interface module for boxcap.

Contains the command-line interface and the caption renderer.
"""

from .cli import build_parser, main
from .render import render_captions

__all__ = ["build_parser", "main", "render_captions"]
