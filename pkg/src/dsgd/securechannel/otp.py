"""Vernam one-time pad over single-use key handles."""

from __future__ import annotations

import numpy as np

from ..keyfabric.keys import KeyHandle


def xor_array(data: bytes, key: bytes) -> bytes:
    if len(data) != len(key):
        raise ValueError("data and key differ in length")
    return (np.frombuffer(data, np.uint8) ^ np.frombuffer(key, np.uint8)).tobytes()


def otp_encrypt(plaintext: bytes, key: KeyHandle, offset: int | None = None) -> bytes:
    """XOR with key bytes ``[offset, offset + len)`` (default: the handle's cursor).

    Those key bytes are consumed and zeroized; touching them again raises
    :class:`~dsgd.errors.KeyReuseError`.
    """
    if offset is None:
        offset = key.cursor
    pad = key.read(offset, len(plaintext))
    return xor_array(bytes(plaintext), pad) if plaintext else b""


def otp_decrypt(ciphertext: bytes, key: KeyHandle, offset: int | None = None) -> bytes:
    return otp_encrypt(ciphertext, key, offset)
