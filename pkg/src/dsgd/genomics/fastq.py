"""FASTQ reading and writing.

Canonical form: ``@<id>``, sequence, a bare ``+``, quality; every line ends
in ``\\n``. A ``+`` line that repeats the id is accepted and written back bare.
"""

from __future__ import annotations

import gzip
import io
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

from ..errors import FastqParseError

_SEQ_RE = re.compile(r"[ACGTN]*")


@dataclass(frozen=True)
class FastqRecord:
    id: str
    seq: str
    qual: str


@dataclass(frozen=True)
class SimReadTag:
    """Placement carried in simulated read ids: ``sim|<chrom>|<pos>`` (1-based)."""

    chrom: str
    pos: int

    @classmethod
    def parse(cls, read_id: str) -> "SimReadTag":
        token = read_id.split(None, 1)[0] if read_id else ""
        parts = token.split("|")
        if len(parts) != 3 or parts[0] != "sim":
            raise FastqParseError(f"read id {read_id!r} is not of the form sim|<chrom>|<pos>")
        try:
            pos = int(parts[2])
        except ValueError:
            raise FastqParseError(f"read id {read_id!r} has a non-integer position") from None
        if pos < 1 or not parts[1]:
            raise FastqParseError(f"read id {read_id!r}: position must be >= 1")
        return cls(parts[1], pos)

    def format(self) -> str:
        return f"sim|{self.chrom}|{self.pos}"


def _open(source, gzipped: bool) -> BinaryIO:
    if isinstance(source, str):
        source = source.encode()
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(bytes(source))
    if gzipped:
        source = gzip.GzipFile(fileobj=source, mode="rb")
    return source


def iter_fastq(source, gzipped: bool = False) -> Iterator[FastqRecord]:
    fh = _open(source, gzipped)
    lineno = 0
    try:
        while True:
            head = fh.readline()
            if not head:
                return
            lineno += 1
            seq, plus, qual = fh.readline(), fh.readline(), fh.readline()
            if not qual:
                raise FastqParseError("truncated record", lineno)
            head = head.decode("ascii").rstrip("\r\n")
            seq = seq.decode("ascii").rstrip("\r\n")
            plus = plus.decode("ascii").rstrip("\r\n")
            qual = qual.decode("ascii").rstrip("\r\n")
            if not head.startswith("@"):
                raise FastqParseError("header line must start with '@'", lineno)
            if not plus.startswith("+") or (len(plus) > 1 and plus[1:] != head[1:]):
                raise FastqParseError("separator line must be '+' (optionally followed by the id)", lineno + 2)
            if not _SEQ_RE.fullmatch(seq):
                raise FastqParseError("sequence contains bases outside ACGTN", lineno + 1)
            if len(seq) != len(qual):
                raise FastqParseError(f"sequence has {len(seq)} bases but quality has {len(qual)}", lineno + 3)
            lineno += 3
            yield FastqRecord(head[1:], seq, qual)
    except UnicodeDecodeError as exc:
        raise FastqParseError(f"non-ASCII data: {exc}", lineno) from None
    except (EOFError, OSError) as exc:
        raise FastqParseError(f"unreadable input: {exc}", lineno) from None


def parse_fastq(source, gzipped: bool = False) -> list[FastqRecord]:
    return list(iter_fastq(source, gzipped))


def write_fastq(records: Iterable[FastqRecord]) -> bytes:
    return "".join(f"@{r.id}\n{r.seq}\n+\n{r.qual}\n" for r in records).encode("ascii")
