"""Seed derivation for reproducible, named random streams."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *labels) -> np.random.SeedSequence:
    """Derive an independent seed stream from a base seed and string labels.

    Adding new streams (e.g. more replications) never perturbs existing ones
    because each stream is keyed by its own label tuple.
    """
    digest = hashlib.sha256(repr(tuple(labels)).encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words])


def derive_rng(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))
