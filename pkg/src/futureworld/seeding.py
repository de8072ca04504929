"""Stable seed derivation for all stochastic components.

Every random stream in the engine is keyed by a context path (master seed,
stage name, day, question id, ...) instead of consuming a shared generator.
This keeps each pipeline phase a pure function of its inputs, which is what
makes restarts and replays reproduce byte-identical state.
"""

from __future__ import annotations

import hashlib

_SEP = b"\x1f"


def derive_seed(*parts: object) -> int:
    """Derive a 63-bit seed from an ordered tuple of context parts."""
    digest = hashlib.sha256(_SEP.join(str(p).encode("utf-8") for p in parts)).digest()
    return int.from_bytes(digest[:8], "big") >> 1
