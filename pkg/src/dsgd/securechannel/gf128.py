"""GF(2^128) arithmetic and the polynomial hash behind Wegman-Carter tags.

Field elements are Python ints: bit i is the coefficient of x^i, reduction
polynomial x^128 + x^7 + x^2 + x + 1. A 16-byte block maps to an element as
a big-endian integer (no bit reflection, unlike GCM).

Polynomial hash of a message under key ``a``: zero-pad the message to whole
16-byte blocks m1..mn, append a length block L (message length in bits, as a
128-bit big-endian integer), and run Horner's rule::

    h = 0
    for block in m1, ..., mn, L:
        h = (h ^ block) * a
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK128 = (1 << 128) - 1
REDUCTION = 0x87  # x^7 + x^2 + x + 1


def _clmul_small(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


# R4[t] = t(x) * x^128 reduced, for the 4 bits shifted out of the top
R4 = [_clmul_small(t, REDUCTION) for t in range(16)]


def xtime(v: int) -> int:
    v <<= 1
    if v >> 128:
        v = (v & MASK128) ^ REDUCTION
    return v


def nibble_table(y: int) -> list[int]:
    table = [0] * 16
    table[1] = y
    for k in (2, 4, 8):
        table[k] = xtime(table[k // 2])
    for k in range(3, 16):
        if k & (k - 1):
            hb = 1 << (k.bit_length() - 1)
            table[k] = table[hb] ^ table[k - hb]
    return table


def gf128_mul(x: int, y: int, table: list[int] | None = None) -> int:
    """Multiply with a 4-bit window over ``x``; pass ``nibble_table(y)`` to reuse it."""
    t = table or nibble_table(y)
    z = 0
    for shift in range(124, -4, -4):
        z = ((z << 4) & MASK128) ^ R4[z >> 124]
        z ^= t[(x >> shift) & 0xF]
    return z


def block_int(block: bytes) -> int:
    return int.from_bytes(block.ljust(16, b"\x00"), "big")


def poly_hash_py(message: bytes, a: int) -> int:
    """Reference (pure Python) polynomial hash; see :func:`tags_batch` for bulk use."""
    t = nibble_table(a)
    h = 0
    for i in range(0, len(message), 16):
        h = gf128_mul(h ^ block_int(message[i:i + 16]), a, t)
    return gf128_mul(h ^ (len(message) * 8), a, t)


# R8[t] = t(x) * x^128 reduced, for the byte shifted out of the top
_R8_ARR = np.array([_clmul_small(t, REDUCTION) for t in range(256)], dtype=np.uint64)


@njit(cache=True)
def _mul8(zh, zl, th, tl, r8):
    """z * a, consuming z one byte at a time from the top; th/tl is the byte table of a."""
    rh = np.uint64(0)
    rl = np.uint64(0)
    for i in range(16):
        if i < 8:
            byte = (zh >> np.uint64(56 - 8 * i)) & np.uint64(255)
        else:
            byte = (zl >> np.uint64(56 - 8 * (i - 8))) & np.uint64(255)
        top = rh >> np.uint64(56)
        rh = (rh << np.uint64(8)) | (rl >> np.uint64(56))
        rl = (rl << np.uint64(8)) ^ r8[top]
        rh ^= th[byte]
        rl ^= tl[byte]
    return rh, rl


@njit(cache=True)
def _load(buf, stop, pos):
    hi = np.uint64(0)
    lo = np.uint64(0)
    if pos + 16 <= stop:
        for j in range(8):
            hi = (hi << np.uint64(8)) | np.uint64(buf[pos + j])
            lo = (lo << np.uint64(8)) | np.uint64(buf[pos + 8 + j])
        return hi, lo
    for j in range(16):
        v = np.uint64(buf[pos + j]) if pos + j < stop else np.uint64(0)
        if j < 8:
            hi = (hi << np.uint64(8)) | v
        else:
            lo = (lo << np.uint64(8)) | v
    return hi, lo


@njit(cache=True)
def _byte_table(ah, al, th, tl):
    th[0] = 0
    tl[0] = 0
    th[1] = ah
    tl[1] = al
    k = 2
    while k < 256:
        h = th[k // 2]
        lo = tl[k // 2]
        carry = h >> np.uint64(63)
        h = (h << np.uint64(1)) | (lo >> np.uint64(63))
        lo = lo << np.uint64(1)
        if carry:
            lo ^= np.uint64(0x87)
        th[k] = h
        tl[k] = lo
        for j in range(1, k):
            th[k + j] = th[k] ^ th[j]
            tl[k + j] = tl[k] ^ tl[j]
        k *= 2


@njit(cache=True)
def _tag_kernel(buf, starts, lengths, keys, out, r8):
    th = np.zeros(256, np.uint64)
    tl = np.zeros(256, np.uint64)
    for f in range(starts.shape[0]):
        ah, al = _load(keys[f], 16, 0)
        bh, bl = _load(keys[f], 32, 16)
        _byte_table(ah, al, th, tl)
        zh = np.uint64(0)
        zl = np.uint64(0)
        s = starts[f]
        n = lengths[f]
        p = 0
        while p < n:
            mh, ml = _load(buf, s + n, s + p)
            zh, zl = _mul8(zh ^ mh, zl ^ ml, th, tl, r8)
            p += 16
        nbits = np.uint64(n)
        zh, zl = _mul8(zh ^ (nbits >> np.uint64(61)), zl ^ (nbits << np.uint64(3)), th, tl, r8)
        zh ^= bh
        zl ^= bl
        for j in range(8):
            out[f, j] = np.uint8((zh >> np.uint64(56 - 8 * j)) & np.uint64(0xFF))
            out[f, 8 + j] = np.uint8((zl >> np.uint64(56 - 8 * j)) & np.uint64(0xFF))


def tags_batch(buf: np.ndarray, starts: np.ndarray, lengths: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Tag ``buf[starts[i]:starts[i]+lengths[i]]`` under 32-byte key row ``keys[i]`` (a || b).

    Returns an ``(n, 16)`` uint8 array of tags ``poly_hash(msg, a) ^ b``.
    """
    out = np.empty((len(starts), 16), dtype=np.uint8)
    if len(starts):
        _tag_kernel(np.ascontiguousarray(buf, dtype=np.uint8),
                    np.ascontiguousarray(starts, dtype=np.int64),
                    np.ascontiguousarray(lengths, dtype=np.int64),
                    np.ascontiguousarray(keys, dtype=np.uint8).reshape(-1, 32), out, _R8_ARR)
    return out


def tag_bytes(message: bytes, a: int, b: int) -> bytes:
    buf = np.frombuffer(message, dtype=np.uint8) if message else np.zeros(1, np.uint8)
    key = np.frombuffer(a.to_bytes(16, "big") + b.to_bytes(16, "big"), dtype=np.uint8)
    out = tags_batch(buf, np.zeros(1, np.int64), np.array([len(message)], np.int64), key.reshape(1, 32))
    return out[0].tobytes()
