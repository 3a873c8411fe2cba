"""
Helper functions for boxcap.

Utility functions for file operations, line-delimited records and seeding.
"""

import hashlib
import json
import random
from pathlib import Path

import numpy as np
import torch


def ensure_directory_exists(directory_path):
    """
    Ensure that a directory exists, creating it if necessary.

    Args:
        directory_path (str or Path): Path to the directory

    Returns:
        Path: The directory path
    """
    path = Path(directory_path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def read_jsonl(path):
    """
    Iterate over the records of a line-delimited JSON file.

    Blank lines are skipped but still counted, so line numbers match the file.

    Args:
        path (str or Path): File to read

    Yields:
        tuple: (1-based line number, raw line text)
    """
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if line.strip():
                yield line_no, line


def write_jsonl(path, records):
    """
    Write records as line-delimited JSON with sorted keys.

    Args:
        path (str or Path): Output file
        records (iterable): JSON-serialisable dictionaries

    Returns:
        int: Number of records written
    """
    path = Path(path)
    if path.parent != Path(""):
        ensure_directory_exists(path.parent)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def seed_everything(seed):
    """
    Seed python, numpy and torch and request deterministic kernels.

    Args:
        seed (int): Global seed

    Returns:
        numpy.random.Generator: A generator seeded with ``seed``
    """
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    return np.random.default_rng(seed)


def layout_seed(values):
    """Stable 64-bit seed from a sequence of floats (independent of PYTHONHASHSEED)."""
    data = np.asarray(values, dtype=np.float64).tobytes()
    digest = hashlib.blake2b(data, digest_size=8).digest()
    return int.from_bytes(digest, "little")
