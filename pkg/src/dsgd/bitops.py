"""Byte-level helpers shared by every module."""

from __future__ import annotations

import numpy as np


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"xor operands differ in length: {len(a)} != {len(b)}")
    n = len(a)
    if n > 4096:
        return np.bitwise_xor(np.frombuffer(a, np.uint8), np.frombuffer(b, np.uint8)).tobytes()
    # big-int XOR beats numpy on short buffers
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(n, "little")


def xor_into(dst: np.ndarray, src: np.ndarray) -> None:
    np.bitwise_xor(dst, src, out=dst)


def zeroize(buf: bytearray | memoryview | np.ndarray, start: int = 0, stop: int | None = None) -> None:
    """Overwrite ``buf[start:stop]`` with zero bytes in place."""
    if stop is None:
        stop = len(buf)
    if isinstance(buf, np.ndarray):
        buf[start:stop] = 0
    else:
        buf[start:stop] = bytes(stop - start)


def count_nonzero(buf: bytes | bytearray | memoryview | np.ndarray) -> int:
    if isinstance(buf, np.ndarray):
        return int(np.count_nonzero(buf))
    return int(np.count_nonzero(np.frombuffer(buf, dtype=np.uint8)))
