"""Small shared helpers."""

from __future__ import annotations

import hashlib

from gridshield.codec import RawFrame


def frame_digest(raw: RawFrame) -> str:
    """Stable short digest of frame bytes, used to track copies in the log."""
    return hashlib.blake2b(raw.data, digest_size=8).hexdigest()
