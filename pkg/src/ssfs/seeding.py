"""Deterministic seed derivation for nested random processes."""

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(*parts) -> int:
    """Derive a stable 63-bit seed from structured parts.

    Built on sha256 so the result is identical across runs, platforms and
    Python processes (``hash()`` is salted per process and unusable here).
    Parts are joined with an unlikely separator to avoid collisions between
    e.g. ("a", "bc") and ("ab", "c").
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK
