"""Synthetic reference, planted SNVs and noise-free reads with known truth.

Reads come in pairs drawn from the same start: one from a haplotype carrying
every planted variant, one from a haplotype carrying only the homozygous
ones. A heterozygous site therefore shows exactly half alt bases, a
homozygous site all alt bases. Starts first tile each chromosome
end-to-end (so every base is covered when enough reads are requested), the
remaining pairs land uniformly at random.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .caller import CallerParams, Reference
from .fastq import FastqRecord
from .vcf import VcfRecord

QUAL_CHAR = "I"


@dataclass(frozen=True)
class PlantedVariant:
    chrom: str
    pos: int
    ref_base: str
    alt_base: str
    genotype: str  # "0/1" or "1/1"


@dataclass
class SimulatedData:
    reference: Reference
    variants: list[PlantedVariant]
    reads: list[FastqRecord]
    depth: dict[str, list[int]]  # per-chrom coverage counted while generating

    def expected_calls(self, params: CallerParams = CallerParams()) -> list[tuple[str, int, str, str, str]]:
        """(chrom, pos, ref, alt, genotype) the caller must report, from the generator's own bookkeeping."""
        out = []
        for v in self.variants:
            if self.depth[v.chrom][v.pos - 1] < params.min_depth:
                continue
            frac = 1.0 if v.genotype == "1/1" else 0.5
            if frac < params.alt_fraction:
                continue
            gt = "1/1" if frac >= params.hom_fraction else "0/1"
            out.append((v.chrom, v.pos, v.ref_base, v.alt_base, gt))
        return sorted(out)


def calls_of(records: list[VcfRecord]) -> list[tuple[str, int, str, str, str]]:
    return sorted((r.chrom, r.pos, r.ref_base, r.alt_base, r.genotype) for r in records)


def simulate(reference_length: int, num_reads: int, read_length: int, num_variants: int,
             seed: int, *, num_chroms: int = 1) -> SimulatedData:
    if read_length < 1 or reference_length < read_length * num_chroms:
        raise ValueError("each chromosome must be at least one read long")
    rng = np.random.default_rng(seed)
    sizes = [reference_length // num_chroms] * num_chroms
    sizes[-1] += reference_length - sum(sizes)
    chroms = [f"chr{i + 1}" for i in range(num_chroms)]
    bases = np.array(list("ACGT"))
    ref = Reference({c: "".join(bases[rng.integers(0, 4, n)]) for c, n in zip(chroms, sizes)})

    if num_variants > reference_length:
        raise ValueError("more variants than reference positions")
    flat = np.sort(rng.choice(reference_length, size=num_variants, replace=False))
    bounds = np.cumsum([0] + sizes)
    variants = []
    for g in flat:
        ci = int(np.searchsorted(bounds, g, side="right") - 1)
        pos = int(g - bounds[ci]) + 1
        r = ref[chroms[ci]][pos - 1]
        alt = "ACGT".replace(r, "")[rng.integers(0, 3)]
        gt = "1/1" if rng.random() < 0.5 else "0/1"
        variants.append(PlantedVariant(chroms[ci], pos, r, alt, gt))

    haps = {}
    for c in chroms:
        h_all = list(ref[c])
        h_hom = list(ref[c])
        for v in variants:
            if v.chrom == c:
                h_all[v.pos - 1] = v.alt_base
                if v.genotype == "1/1":
                    h_hom[v.pos - 1] = v.alt_base
        haps[c] = ("".join(h_all), "".join(h_hom))

    pairs = max(0, (num_reads + 1) // 2)
    tiling = []
    for c, n in zip(chroms, sizes):
        starts = list(range(1, n - read_length + 2, read_length))
        if starts[-1] != n - read_length + 1:
            starts.append(n - read_length + 1)
        tiling += [(c, s) for s in starts]
    placements = tiling[:pairs]
    extra = pairs - len(placements)
    if extra > 0:
        ci = rng.choice(num_chroms, size=extra, p=np.array(sizes) / reference_length)
        for k in ci:
            placements.append((chroms[k], int(rng.integers(1, sizes[k] - read_length + 2))))

    reads = []
    depth = {c: [0] * n for c, n in zip(chroms, sizes)}
    qual = QUAL_CHAR * read_length
    for n, (c, s) in enumerate(placements):
        for h, hap in enumerate(haps[c]):
            reads.append(FastqRecord(f"sim|{c}|{s} r{n}/{h + 1}", hap[s - 1:s - 1 + read_length], qual))
        cov = depth[c]
        for i in range(s - 1, s - 1 + read_length):
            cov[i] += 2
    return SimulatedData(ref, variants, reads, depth)


def simulate_fastq_size(target_bytes: int, seed: int, *, read_length: int = 100,
                        coverage: int = 30, variant_rate: float = 0.01) -> SimulatedData:
    """Pick generator sizes so the FASTQ comes out near ``target_bytes``."""
    per_read = 2 * read_length + 30
    num_reads = max(2, target_bytes // per_read)
    ref_len = max(read_length, num_reads * read_length // coverage)
    return simulate(ref_len, num_reads, read_length, max(1, int(ref_len * variant_rate)), seed)
