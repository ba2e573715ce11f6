"""Minimal single-sample VCF v4.2 subset and access-policy filtering.

Subset: ``##`` meta lines, one ``#CHROM`` header line, and records with
exactly ten tab-separated columns (FORMAT is ``GT``). QUAL is an integer,
a decimal, or ``.``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace

from ..errors import VcfParseError

COLUMNS = ("#CHROM", "POS", "ID", "REF", "ALT", "QUAL", "FILTER", "INFO", "FORMAT")
GENOTYPES = ("0/1", "1/1")


def _format_qual(q) -> str:
    if q is None:
        return "."
    if isinstance(q, int):
        return str(q)
    return f"{q:g}"


def _parse_qual(text: str, lineno: int):
    if text == ".":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise VcfParseError(f"QUAL {text!r} is not numeric", lineno) from None


@dataclass(frozen=True)
class VcfRecord:
    chrom: str
    pos: int
    id: str
    ref_base: str
    alt_base: str
    qual: float | int | None
    filter: str
    genotype: str
    info: str = "."

    def __post_init__(self):
        if self.alt_base == self.ref_base:
            raise ValueError(f"{self.chrom}:{self.pos}: ALT equals REF")

    @property
    def key(self) -> tuple[str, int]:
        return (self.chrom, self.pos)

    def to_line(self) -> str:
        return "\t".join((self.chrom, str(self.pos), self.id, self.ref_base, self.alt_base,
                          _format_qual(self.qual), self.filter, self.info, "GT", self.genotype))


@dataclass
class VcfDocument:
    meta: list[str] = field(default_factory=lambda: ["##fileformat=VCFv4.2"])
    sample: str = "sample"
    records: list[VcfRecord] = field(default_factory=list)
    unsorted_lines: list[int] = field(default_factory=list)

    @property
    def header_line(self) -> str:
        return "\t".join(COLUMNS + (self.sample,))

    @property
    def is_sorted(self) -> bool:
        return all(a.key <= b.key for a, b in zip(self.records, self.records[1:]))

    def __len__(self) -> int:
        return len(self.records)


def write_vcf(doc: VcfDocument) -> bytes:
    lines = list(doc.meta) + [doc.header_line] + [r.to_line() for r in doc.records]
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_vcf(text: str | bytes) -> VcfDocument:
    """Parse the subset. Out-of-order records are kept and their line numbers listed in ``unsorted_lines``."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    meta: list[str] = []
    sample = None
    records: list[VcfRecord] = []
    unsorted: list[int] = []
    for lineno, line in enumerate(lines, 1):
        if line.startswith("##"):
            if sample is not None:
                raise VcfParseError("meta line after the #CHROM header", lineno)
            meta.append(line)
            continue
        if line.startswith("#"):
            cols = line.split("\t")
            if tuple(cols[:9]) != COLUMNS or len(cols) != 10:
                raise VcfParseError("header must list the nine fixed columns and one sample", lineno)
            sample = cols[9]
            continue
        if sample is None:
            raise VcfParseError("record before the #CHROM header", lineno)
        cols = line.split("\t")
        if len(cols) != 10:
            raise VcfParseError(f"expected 10 columns, found {len(cols)}", lineno)
        try:
            pos = int(cols[1])
        except ValueError:
            raise VcfParseError(f"POS {cols[1]!r} is not an integer", lineno) from None
        if cols[8] != "GT":
            raise VcfParseError(f"FORMAT must be GT, found {cols[8]!r}", lineno)
        rec = VcfRecord(cols[0], pos, cols[2], cols[3], cols[4], _parse_qual(cols[5], lineno),
                        cols[6], cols[9], cols[7])
        if records and rec.key < records[-1].key:
            unsorted.append(lineno)
        records.append(rec)
    if sample is None:
        raise VcfParseError("missing #CHROM header line")
    return VcfDocument(meta, sample, records, unsorted)


Region = tuple[str, int, int]


@dataclass(frozen=True)
class FilterPolicy:
    """What part of a call set a user may see.

    ``region`` keeps records inside any inclusive region, ``count`` keeps the
    first ``max_records`` (in sort order), ``both`` applies region then count.
    """

    regions: tuple[Region, ...] = ()
    max_records: int | None = None
    mode: str = "region"

    def __post_init__(self):
        if self.mode not in ("region", "count", "both"):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        object.__setattr__(self, "regions", tuple(tuple(r) for r in self.regions))
        for chrom, start, end in self.regions:
            if start > end:
                raise ValueError(f"region {chrom}:{start}-{end} has start > end")
        if self.max_records is not None and self.max_records < 0:
            raise ValueError("max_records must be >= 0")

    @classmethod
    def parse_regions(cls, spec: str) -> tuple[Region, ...]:
        """``"chr1:100-200,chr2:5-5"`` -> ``(("chr1", 100, 200), ("chr2", 5, 5))``."""
        out = []
        for item in filter(None, (s.strip() for s in spec.split(","))):
            try:
                chrom, span = item.rsplit(":", 1)
                start, end = (int(x) for x in span.split("-"))
            except ValueError:
                raise ValueError(f"bad region {item!r}; expected chrom:start-end") from None
            out.append((chrom, start, end))
        return tuple(out)

    def describe(self) -> str:
        regions = ",".join(f"{c}:{s}-{e}" for c, s, e in self.regions) or "-"
        limit = "-" if self.max_records is None else str(self.max_records)
        return f"mode={self.mode};regions={regions};max_records={limit}"


class _RegionIndex:
    def __init__(self, regions):
        merged: dict[str, list[tuple[int, int]]] = {}
        for chrom, start, end in sorted(regions):
            spans = merged.setdefault(chrom, [])
            if spans and start <= spans[-1][1] + 1:
                spans[-1] = (spans[-1][0], max(spans[-1][1], end))
            else:
                spans.append((start, end))
        self._starts = {c: [s for s, _ in v] for c, v in merged.items()}
        self._spans = merged

    def __contains__(self, key: tuple[str, int]) -> bool:
        chrom, pos = key
        starts = self._starts.get(chrom)
        if not starts:
            return False
        i = bisect.bisect_right(starts, pos) - 1
        return i >= 0 and pos <= self._spans[chrom][i][1]


def filter_vcf(doc: VcfDocument, policy: FilterPolicy) -> VcfDocument:
    if doc.unsorted_lines or not doc.is_sorted:
        raise VcfParseError("cannot filter an unsorted VCF")
    records = doc.records
    if policy.mode in ("region", "both"):
        index = _RegionIndex(policy.regions)
        records = [r for r in records if r.key in index]
    if policy.mode in ("count", "both") and policy.max_records is not None:
        records = records[:policy.max_records]
    meta = list(doc.meta) + [f"##dsgd_filter={policy.describe()}"]
    return replace(doc, meta=meta, records=list(records), unsorted_lines=[])
