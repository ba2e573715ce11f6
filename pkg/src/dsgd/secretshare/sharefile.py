"""Chunked sharing of large payloads and the on-disk share file format.

Share file layout (all integers big-endian)::

    offset  size  field
    0       16    magic   b"DSGDSHARE-XOR23\\0" or b"DSGDSHARE-SHM23\\0"
    16      1     label   ASCII 'A', 'B' or 'C'
    17      8     original_length   total secret bytes before padding
    25      8     chunk_count
    33      8     chunk_size        secret bytes per chunk (even; last chunk may be shorter)
    41      ...   chunk_count records of part1 || part2

Chunk ``i`` covers secret bytes ``[i*chunk_size, min((i+1)*chunk_size, original_length))``;
an odd-length final chunk is padded with one 0x00, so each half is
``ceil(len/2)`` bytes. An empty secret is stored as one empty chunk.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

from ..errors import ShareFormatError, ShareLengthError
from .shamir import reconstruct_shamir23, share_shamir23
from .xor23 import (LABELS, RandomTape, SecretBlob, SharePair, check_pair,
                    reconstruct_xor23, share_xor23)

DEFAULT_CHUNK = 64 * 1024 * 1024
MAGIC = {"xor": b"DSGDSHARE-XOR23\x00", "shamir": b"DSGDSHARE-SHM23\x00"}
_SCHEME_OF = {v: k for k, v in MAGIC.items()}
_HEADER = struct.Struct(">16scQQQ")
HEADER_SIZE = _HEADER.size


def chunk_lengths(original_length: int, chunk_size: int) -> list[int]:
    if original_length == 0:
        return [0]
    full, rest = divmod(original_length, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


@dataclass
class ShareBundle:
    """One holder's share of a (possibly multi-chunk) payload."""

    label: str
    scheme: str
    original_length: int
    chunk_size: int
    chunks: list[SharePair]

    @property
    def size(self) -> int:
        return sum(c.size for c in self.chunks)

    def to_bytes(self) -> bytes:
        out = bytearray(_HEADER.pack(MAGIC[self.scheme], self.label.encode(),
                                     self.original_length, len(self.chunks), self.chunk_size))
        for c in self.chunks:
            out += c.part1
            out += c.part2
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ShareBundle":
        if len(blob) < HEADER_SIZE:
            raise ShareFormatError("share file shorter than its header")
        magic, label, total, count, chunk_size = _HEADER.unpack_from(blob)
        scheme = _SCHEME_OF.get(magic)
        if scheme is None:
            raise ShareFormatError("bad magic")
        label = label.decode("ascii", "replace")
        if label not in LABELS:
            raise ShareFormatError(f"bad label {label!r}")
        if chunk_size == 0 or chunk_size % 2:
            raise ShareFormatError(f"chunk_size {chunk_size} must be even and positive")
        lengths = chunk_lengths(total, chunk_size)
        if len(lengths) != count:
            raise ShareFormatError(f"chunk_count {count} does not match original_length {total}")
        pos = HEADER_SIZE
        chunks = []
        for n in lengths:
            half = (n + 1) // 2
            if pos + 2 * half > len(blob):
                raise ShareFormatError("share file truncated")
            chunks.append(SharePair(label, blob[pos:pos + half], blob[pos + half:pos + 2 * half], n))
            pos += 2 * half
        if pos != len(blob):
            raise ShareFormatError(f"{len(blob) - pos} trailing bytes after last chunk")
        return cls(label, scheme, total, chunk_size, chunks)


def _check_chunk_size(chunk_size: int) -> None:
    if chunk_size <= 0 or chunk_size % 2:
        raise ValueError("chunk_size must be a positive even number")


def _share_chunk(data: bytes, entropy, scheme: str):
    blob = SecretBlob.from_bytes(data)
    if scheme == "xor":
        return share_xor23(blob, RandomTape.draw(entropy, blob.half_length))
    if scheme == "shamir":
        return share_shamir23(blob, entropy)
    raise ValueError(f"unknown scheme {scheme!r}")


def deal(data: bytes, entropy, *, scheme: str = "xor",
         chunk_size: int = DEFAULT_CHUNK) -> dict[str, ShareBundle]:
    """Share ``data`` chunk by chunk, each chunk with a fresh tape."""
    _check_chunk_size(chunk_size)
    bundles = {lab: ShareBundle(lab, scheme, len(data), chunk_size, []) for lab in LABELS}
    view = memoryview(data)
    pos = 0
    for n in chunk_lengths(len(data), chunk_size):
        shares = _share_chunk(bytes(view[pos:pos + n]), entropy, scheme)
        pos += n
        for pair in shares:
            bundles[pair.label].chunks.append(pair)
    return bundles


def combine(x: ShareBundle, y: ShareBundle) -> bytes:
    if x.scheme != y.scheme:
        raise ShareLengthError(f"cannot combine {x.scheme} and {y.scheme} shares")
    if (x.original_length, x.chunk_size, len(x.chunks)) != (y.original_length, y.chunk_size, len(y.chunks)):
        raise ShareLengthError("share bundles describe different payloads")
    rebuild = reconstruct_xor23 if x.scheme == "xor" else reconstruct_shamir23
    if x.chunks:
        check_pair(x.chunks[0], y.chunks[0])
    return b"".join(rebuild(cx, cy).data for cx, cy in zip(x.chunks, y.chunks))


def share_file(src: str | Path, outputs: dict[str, str | Path], entropy, *,
               scheme: str = "xor", chunk_size: int = DEFAULT_CHUNK) -> int:
    """Stream ``src`` into three share files without holding it in memory. Returns its size."""
    _check_chunk_size(chunk_size)
    src = Path(src)
    total = src.stat().st_size
    lengths = chunk_lengths(total, chunk_size)
    files: dict[str, BinaryIO] = {}
    try:
        for lab in LABELS:
            files[lab] = open(outputs[lab], "wb")
            files[lab].write(_HEADER.pack(MAGIC[scheme], lab.encode(), total, len(lengths), chunk_size))
        with open(src, "rb") as fh:
            for n in lengths:
                data = fh.read(n)
                if len(data) != n:
                    raise ShareFormatError(f"{src} changed while being shared")
                for pair in _share_chunk(data, entropy, scheme):
                    files[pair.label].write(pair.part1)
                    files[pair.label].write(pair.part2)
    finally:
        for fh in files.values():
            fh.close()
    return total


def read_share_file(path: str | Path) -> ShareBundle:
    return ShareBundle.from_bytes(Path(path).read_bytes())


def iter_combined(x: ShareBundle, y: ShareBundle) -> Iterator[bytes]:
    """Chunk-wise reconstruction for callers that stream the result."""
    rebuild = reconstruct_xor23 if x.scheme == "xor" else reconstruct_shamir23
    for cx, cy in zip(x.chunks, y.chunks):
        yield rebuild(cx, cy).data
