"""Shamir (2,3) sharing over GF(2^8), byte by byte.

Kept alongside the XOR scheme as an independent route to the same plaintext.
Share labels A, B, C are the evaluation points x = 1, 2, 3.
"""

from __future__ import annotations

import numpy as np

from ..errors import EntropyExhaustedError
from .gf256 import INV, MUL
from .xor23 import SecretBlob, SharePair, ShareSet, _as_blob, check_pair

X_OF = {"A": 1, "B": 2, "C": 3}


def share_shamir23(secret: SecretBlob | bytes, entropy) -> ShareSet:
    """Share each byte s with p(x) = s + c*x, one fresh coefficient byte c per secret byte."""
    secret = _as_blob(secret)
    s = np.frombuffer(secret.payload, dtype=np.uint8)
    raw = entropy.draw(len(s))
    if len(raw) < len(s):
        raise EntropyExhaustedError(f"needed {len(s)} coefficient bytes, got {len(raw)}")
    coeff = np.frombuffer(raw, dtype=np.uint8)
    half = len(s) // 2
    pairs = []
    for label, x in X_OF.items():
        y = (s ^ MUL[coeff, x]).tobytes()
        pairs.append(SharePair(label, y[:half], y[half:], secret.original_length))
    return ShareSet(*pairs)


def reconstruct_shamir23(x: SharePair, y: SharePair) -> SecretBlob:
    """Lagrange interpolation at 0: s = y1*x2/(x1+x2) + y2*x1/(x1+x2)."""
    check_pair(x, y)
    x1, x2 = X_OF[x.label], X_OF[y.label]
    inv = int(INV[x1 ^ x2])
    l1 = int(MUL[x2, inv])
    l2 = int(MUL[x1, inv])
    y1 = np.frombuffer(x.part1 + x.part2, dtype=np.uint8)
    y2 = np.frombuffer(y.part1 + y.part2, dtype=np.uint8)
    s = MUL[y1, l1] ^ MUL[y2, l2]
    return SecretBlob(s.tobytes(), x.original_length)
