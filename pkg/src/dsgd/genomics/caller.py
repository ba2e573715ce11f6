"""Deterministic pileup SNV caller standing in for a production secondary-analysis engine.

Reads carry their placement in the id (``sim|chrom|pos``), so there is no
alignment step. Per reference position:

* depth = number of covering A/C/G/T bases (N is ignored);
* the alt allele is the most frequent base other than the reference base,
  ties going to the lexically smaller base;
* a record is emitted when depth >= ``min_depth`` and
  alt_count / depth >= ``alt_fraction``; genotype is ``1/1`` if that
  fraction is >= ``hom_fraction``, else ``0/1``;
* QUAL = round(-10 * log10(max(1 - fraction, 1e-6))).

Positions whose reference base is N are never called.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import GenomicsError, ReferenceBoundsError
from .fastq import FastqRecord, SimReadTag
from .vcf import VcfDocument, VcfRecord

BASES = "ACGT"
_CODE = np.full(256, 255, dtype=np.uint8)
for _i, _b in enumerate("ACGTN"):
    _CODE[ord(_b)] = _i


@dataclass(frozen=True)
class CallerParams:
    min_depth: int = 2
    alt_fraction: float = 0.5
    hom_fraction: float = 0.8

    def describe(self) -> str:
        return f"min_depth={self.min_depth};alt_fraction={self.alt_fraction:g};hom_fraction={self.hom_fraction:g}"


class Reference(dict):
    """chrom -> base string."""

    def __init__(self, seqs: dict[str, str] | None = None):
        super().__init__()
        for chrom, seq in (seqs or {}).items():
            if not seq:
                raise GenomicsError(f"reference {chrom} is empty")
            if seq.strip("ACGTN"):
                raise GenomicsError(f"reference {chrom} contains bases outside ACGTN")
            self[chrom] = seq

    def to_fasta(self, width: int = 60) -> bytes:
        out = []
        for chrom in sorted(self):
            seq = self[chrom]
            out.append(f">{chrom}")
            out.extend(seq[i:i + width] for i in range(0, len(seq), width))
        return ("\n".join(out) + "\n").encode("ascii")

    @classmethod
    def from_fasta(cls, data: bytes | str) -> "Reference":
        if isinstance(data, bytes):
            data = data.decode("ascii")
        seqs: dict[str, list[str]] = {}
        current = None
        for line in data.splitlines():
            if line.startswith(">"):
                current = line[1:].split()[0]
                seqs[current] = []
            elif line.strip():
                if current is None:
                    raise GenomicsError("FASTA sequence before first '>' header")
                seqs[current].append(line.strip().upper())
        return cls({c: "".join(v) for c, v in seqs.items()})

    @classmethod
    def load(cls, path: str | Path) -> "Reference":
        return cls.from_fasta(Path(path).read_bytes())


def pileup(starts: np.ndarray, seqs: list[str], length: int) -> np.ndarray:
    """Base counts per position: an ``(length, 5)`` array over A, C, G, T, N."""
    if not seqs:
        return np.zeros((length, 5), dtype=np.int64)
    lens = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=len(seqs))
    codes = _CODE[np.frombuffer("".join(seqs).encode("ascii"), dtype=np.uint8)].astype(np.int64)
    begins = np.cumsum(lens) - lens
    positions = np.arange(codes.size, dtype=np.int64) + np.repeat(starts - 1 - begins, lens)
    return np.bincount(positions * 5 + codes, minlength=length * 5).reshape(length, 5)


def toy_call(reads: Iterable[FastqRecord], reference: Reference,
             params: CallerParams = CallerParams(), sample: str = "sample") -> VcfDocument:
    placed: dict[str, tuple[list[int], list[str]]] = {c: ([], []) for c in reference}
    for r in reads:
        tag = SimReadTag.parse(r.id)
        ref = reference.get(tag.chrom)
        if ref is None:
            raise ReferenceBoundsError(f"read {r.id!r} names unknown chromosome {tag.chrom!r}")
        if tag.pos + len(r.seq) - 1 > len(ref):
            raise ReferenceBoundsError(
                f"read {r.id!r} spans {tag.chrom}:{tag.pos}-{tag.pos + len(r.seq) - 1}, "
                f"past the reference end {len(ref)}")
        starts, seqs = placed[tag.chrom]
        starts.append(tag.pos)
        seqs.append(r.seq)

    records: list[VcfRecord] = []
    for chrom in sorted(reference):
        ref = reference[chrom]
        starts, seqs = placed[chrom]
        if not seqs:
            continue
        counts = pileup(np.asarray(starts, dtype=np.int64), seqs, len(ref))[:, :4]
        depth = counts.sum(axis=1)
        ref_code = _CODE[np.frombuffer(ref.encode("ascii"), dtype=np.uint8)].astype(np.int64)
        callable_ref = ref_code < 4
        masked = counts.copy()
        masked[np.arange(len(ref))[callable_ref], ref_code[callable_ref]] = -1
        alt = masked.argmax(axis=1)
        alt_count = masked[np.arange(len(ref)), alt]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(depth > 0, alt_count / np.maximum(depth, 1), 0.0)
        hit = callable_ref & (depth >= params.min_depth) & (alt_count > 0) & (frac >= params.alt_fraction)
        for i in np.flatnonzero(hit):
            f = float(frac[i])
            qual = round(-10 * math.log10(max(1.0 - f, 1e-6)))
            records.append(VcfRecord(
                chrom, int(i) + 1, ".", ref[i], BASES[alt[i]], qual, "PASS",
                "1/1" if f >= params.hom_fraction else "0/1",
                f"DP={int(depth[i])};AF={f:.4f}"))

    meta = ["##fileformat=VCFv4.2", "##source=dsgd-toycaller", f"##toycaller={params.describe()}"]
    meta += [f"##contig=<ID={c},length={len(reference[c])}>" for c in sorted(reference)]
    meta += ['##INFO=<ID=DP,Number=1,Type=Integer,Description="Covering A/C/G/T bases">',
             '##INFO=<ID=AF,Number=A,Type=Float,Description="Alt allele fraction">',
             '##FORMAT=<ID=GT,Number=1,Type=String,Description="Genotype">']
    return VcfDocument(meta, sample, records)
