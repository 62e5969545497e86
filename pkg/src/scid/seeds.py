"""Deterministic seed substreams.

Every randomized routine takes one integer seed and derives per-purpose
substreams by name, so a single ``--seed`` reproduces a whole run.
"""

import hashlib


def substream(seed: int, name: str) -> int:
    """Derive a 63-bit child seed from (seed, name)."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
