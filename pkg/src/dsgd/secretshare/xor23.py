"""XOR-based (2,3)-threshold secret sharing.

The secret S is split into equal halves S1, S2 and masked with a random tape
R1, R2 of the same size::

    A = (S1 ^ R1)      . (S2 ^ R2 ^ R1)
    B = (S1 ^ R1 ^ R2) . (S2 ^ R2)
    C = R1             . R2

Any two shares recover S; any single share is uniformly distributed for a
uniformly random tape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from ..bitops import xor_bytes
from ..errors import DuplicateLabelError, ShareError, ShareLengthError, TapeMismatchError

LABELS = ("A", "B", "C")


def pad_split(secret: bytes) -> tuple[bytes, bytes, int]:
    """Split ``secret`` into two equal halves, appending one 0x00 if its length is odd."""
    n = len(secret)
    if n % 2:
        secret = bytes(secret) + b"\x00"
    half = len(secret) // 2
    return bytes(secret[:half]), bytes(secret[half:]), n


@dataclass(frozen=True)
class SecretBlob:
    payload: bytes  # padded to even length
    original_length: int

    def __post_init__(self):
        if len(self.payload) % 2:
            raise ShareError("padded payload must have even length")
        if self.original_length not in (len(self.payload), len(self.payload) - 1):
            raise ShareError(
                f"original_length {self.original_length} inconsistent with payload of {len(self.payload)} bytes")

    @classmethod
    def from_bytes(cls, data: bytes) -> "SecretBlob":
        s1, s2, n = pad_split(data)
        return cls(s1 + s2, n)

    @property
    def data(self) -> bytes:
        return self.payload[:self.original_length]

    @property
    def halves(self) -> tuple[bytes, bytes]:
        h = len(self.payload) // 2
        return self.payload[:h], self.payload[h:]

    @property
    def half_length(self) -> int:
        return len(self.payload) // 2


@dataclass(frozen=True)
class RandomTape:
    r1: bytes
    r2: bytes

    def __post_init__(self):
        if len(self.r1) != len(self.r2):
            raise TapeMismatchError("tape halves differ in length")

    @classmethod
    def draw(cls, entropy, half_length: int) -> "RandomTape":
        raw = entropy.draw(2 * half_length)
        return cls(raw[:half_length], raw[half_length:])


@dataclass(frozen=True)
class SharePair:
    label: str
    part1: bytes
    part2: bytes
    original_length: int

    def __post_init__(self):
        if self.label not in LABELS:
            raise ShareError(f"unknown share label {self.label!r}")
        if len(self.part1) != len(self.part2):
            raise ShareLengthError(f"share {self.label}: halves differ in length")

    @property
    def size(self) -> int:
        return len(self.part1) + len(self.part2)


@dataclass(frozen=True)
class ShareSet:
    a: SharePair
    b: SharePair
    c: SharePair

    def __post_init__(self):
        if (self.a.label, self.b.label, self.c.label) != LABELS:
            raise ShareError("share set labels must be A, B, C")
        sizes = {len(p.part1) for p in self}
        if len(sizes) != 1:
            raise ShareLengthError("share halves differ in length across the set")
        if len({p.original_length for p in self}) != 1:
            raise ShareLengthError("original_length differs across the set")

    def __iter__(self) -> Iterator[SharePair]:
        return iter((self.a, self.b, self.c))

    def __getitem__(self, label: str) -> SharePair:
        try:
            return {"A": self.a, "B": self.b, "C": self.c}[label]
        except KeyError:
            raise ShareError(f"unknown share label {label!r}") from None


def _as_blob(secret) -> SecretBlob:
    return secret if isinstance(secret, SecretBlob) else SecretBlob.from_bytes(secret)


def share_xor23(secret: SecretBlob | bytes, tape: RandomTape) -> ShareSet:
    secret = _as_blob(secret)
    s1, s2 = secret.halves
    if len(tape.r1) != len(s1):
        raise TapeMismatchError(f"tape halves are {len(tape.r1)} bytes, secret halves {len(s1)}")
    r1, r2 = tape.r1, tape.r2
    a1 = xor_bytes(s1, r1)
    b2 = xor_bytes(s2, r2)
    n = secret.original_length
    return ShareSet(
        SharePair("A", a1, xor_bytes(b2, r1), n),
        SharePair("B", xor_bytes(a1, r2), b2, n),
        SharePair("C", r1, r2, n),
    )


def check_pair(x: SharePair, y: SharePair) -> None:
    if x.label == y.label:
        raise DuplicateLabelError(f"both shares carry label {x.label}")
    if len(x.part1) != len(y.part1):
        raise ShareLengthError("shares differ in size")
    if x.original_length != y.original_length:
        raise ShareLengthError("shares disagree on original_length")


def reconstruct_xor23(x: SharePair, y: SharePair) -> SecretBlob:
    check_pair(x, y)
    p = {x.label: x, y.label: y}
    if "C" in p and "A" in p:
        a, c = p["A"], p["C"]
        s1 = xor_bytes(a.part1, c.part1)
        s2 = xor_bytes(xor_bytes(a.part2, c.part2), c.part1)
    elif "C" in p:
        b, c = p["B"], p["C"]
        s1 = xor_bytes(xor_bytes(b.part1, c.part1), c.part2)
        s2 = xor_bytes(b.part2, c.part2)
    else:
        a, b = p["A"], p["B"]
        s1 = xor_bytes(xor_bytes(a.part1, a.part2), b.part2)
        s2 = xor_bytes(xor_bytes(b.part2, a.part1), b.part1)
    return SecretBlob(s1 + s2, x.original_length)
