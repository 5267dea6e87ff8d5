"""Deterministic derivation of named sub-generators from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def named_seed(root: int, name: str) -> list[int]:
    """Stable entropy sequence for a (root seed, purpose name) pair."""
    return [int(root), zlib.crc32(name.encode("utf-8"))]


def named_rng(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(named_seed(root, name))


def sub_seed_int(root: int, name: str) -> int:
    """Single non-negative integer seed derived from (root, name)."""
    return (int(root) * 1_000_003 + zlib.crc32(name.encode("utf-8"))) % 2**31
