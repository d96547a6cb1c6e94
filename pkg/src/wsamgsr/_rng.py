"""Seed derivation. Every random stream in the package comes from one
top-level integer seed plus a tuple of keys naming the stream, e.g.
``(seed, "replicate", 3, "folds")``."""

from __future__ import annotations

import hashlib
import os

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("seed keys must be non-negative")
        return int(key)
    digest = hashlib.sha256(str(key).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed for the stream named by ``keys``."""
    ss = np.random.SeedSequence([_key_to_int(seed), *(_key_to_int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0]) >> 1


def derive_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([_key_to_int(seed), *(_key_to_int(k) for k in keys)]))


def default_threads() -> int:
    """Worker count from ``WSAMGSR_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("WSAMGSR_THREADS", "1")))
    except ValueError:
        return 1
