"""RFC 1952 gzip with a fixed header, so equal inputs give equal bytes."""

from __future__ import annotations

import gzip
import zlib

from ..errors import GzipError

DEFAULT_LEVEL = 6


def gzip_compress(data: bytes, level: int = DEFAULT_LEVEL) -> bytes:
    return gzip.compress(bytes(data), compresslevel=level, mtime=0)


def gzip_decompress(blob: bytes) -> bytes:
    try:
        return gzip.decompress(bytes(blob))
    except (gzip.BadGzipFile, EOFError, zlib.error, OSError) as exc:
        raise GzipError(f"corrupt gzip stream: {exc}") from exc
