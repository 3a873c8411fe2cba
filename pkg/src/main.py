#!/usr/bin/env python3
"""
Main entry point for box-captioner.

This script runs the boxcap command-line interface.
"""

import sys
from pathlib import Path

# Add the src directory to the Python path
src_dir = Path(__file__).parent
sys.path.insert(0, str(src_dir))

from boxcap.ui.cli import main as cli_main  # noqa: E402


def main():
    """Main entry point for box-captioner."""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
