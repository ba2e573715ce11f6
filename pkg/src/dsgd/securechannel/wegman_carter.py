"""One-time Wegman-Carter authentication: tag = polyhash_a(message) ^ b."""

from __future__ import annotations

import hmac
from dataclasses import dataclass

from ..errors import KeyReuseError
from .gf128 import MASK128, tag_bytes

KEY_BYTES = 32
TAG_BYTES = 16


@dataclass
class AuthKeyPair:
    a: int
    b: int
    used: bool = False

    def __post_init__(self):
        if not (0 <= self.a <= MASK128 and 0 <= self.b <= MASK128):
            raise ValueError("a and b must be 128-bit field elements")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "AuthKeyPair":
        if len(raw) != KEY_BYTES:
            raise ValueError(f"auth key pair needs {KEY_BYTES} bytes, got {len(raw)}")
        return cls(int.from_bytes(raw[:16], "big"), int.from_bytes(raw[16:], "big"))

    def _claim(self) -> None:
        if self.used:
            raise KeyReuseError("Wegman-Carter key pair already used")
        self.used = True


def wc_tag(message: bytes, keys: AuthKeyPair) -> bytes:
    keys._claim()
    return tag_bytes(bytes(message), keys.a, keys.b)


def wc_verify(message: bytes, tag: bytes, keys: AuthKeyPair) -> bool:
    """Check ``tag``; the key pair is spent whatever the outcome."""
    keys._claim()
    expected = tag_bytes(bytes(message), keys.a, keys.b)
    return hmac.compare_digest(expected, bytes(tag))
