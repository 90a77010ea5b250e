"""Deterministic hashing for config fingerprints and named random streams."""
from __future__ import annotations

import hashlib
import json

import numpy as np


def canonical_json(payload: dict) -> str:
    """
    Serialize a dict to canonical JSON.

    Keys are sorted and separators fixed, so equal payloads always produce
    identical text regardless of insertion order.
    """
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def compute_config_hash(payload: dict) -> str:
    """
    SHA-256 of the canonical JSON of a config dump.

    Returns:
        64-character hex string
    """
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def stream_key(name: str) -> int:
    """Stable 64-bit integer derived from a stream name."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def named_rng(seed: int, name: str) -> np.random.Generator:
    """
    Counter-based generator for one named stream.

    Philox keyed by (seed, name): two streams with different names never
    share draws, and the same (seed, name) always replays the same sequence.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(stream_key(name),))
    return np.random.Generator(np.random.Philox(seq))
