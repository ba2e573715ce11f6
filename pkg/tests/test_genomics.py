import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dsgd.errors import FastqParseError, GenomicsError, GzipError, ReferenceBoundsError, VcfParseError
from dsgd.genomics import (CallerParams, FastqRecord, FilterPolicy, Reference, SimReadTag, VcfDocument,
                           VcfRecord, calls_of, filter_vcf, gzip_compress, gzip_decompress, parse_fastq,
                           parse_vcf, simulate, simulate_fastq_size, toy_call, write_fastq, write_vcf)


def read(chrom, pos, seq, n=0):
    return FastqRecord(f"sim|{chrom}|{pos} r{n}", seq, "I" * len(seq))


# -- FASTQ -----------------------------------------------------------------


def test_fastq_empty_and_single_record():
    assert parse_fastq(b"") == []
    text = b"@sim|chr1|1 r0\nACGTN\n+\nIIII#\n"
    recs = parse_fastq(text)
    assert recs == [FastqRecord("sim|chr1|1 r0", "ACGTN", "IIII#")]
    assert write_fastq(recs) == text


def test_fastq_gzipped_input():
    text = b"@a\nAC\n+\nII\n@b\nG\n+b\n#\n"
    assert [r.id for r in parse_fastq(gzip_compress(text), gzipped=True)] == ["a", "b"]


@pytest.mark.parametrize("text,line", [
    (b"@a\nACGT\n+\nIII\n", 4),
    (b"@a\nACGT\n+\n", 1),
    (b"a\nACGT\n+\nIIII\n", 1),
    (b"@a\nACGT\n-\nIIII\n", 3),
    (b"@a\nACXT\n+\nIIII\n", 2),
    (b"@a\nAC\n+\nII\n@b\nAC\n+\nI\n", 8),
])
def test_fastq_errors_carry_line_numbers(text, line):
    with pytest.raises(FastqParseError) as ei:
        parse_fastq(text)
    assert ei.value.line == line
    assert ei.value.code == "genomics.fastq-parse"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.text("abc|123", min_size=1, max_size=10), st.text("ACGTN", max_size=30)),
                max_size=10))
def test_fastq_round_trip(items):
    recs = [FastqRecord(i, s, "F" * len(s)) for i, s in items]
    assert parse_fastq(write_fastq(recs)) == recs


def test_read_tag_parsing():
    assert SimReadTag.parse("sim|chr2|17 r5/1") == SimReadTag("chr2", 17)
    assert SimReadTag("chrX", 3).format() == "sim|chrX|3"
    for bad in ("", "read1", "sim|chr1", "sim|chr1|0", "sim|chr1|x", "sim||4"):
        with pytest.raises(FastqParseError):
            SimReadTag.parse(bad)


# -- caller ----------------------------------------------------------------


def test_caller_no_reads_gives_headers_only():
    doc = toy_call([], Reference({"chr1": "ACGT"}))
    assert doc.records == []
    assert write_vcf(doc).decode().splitlines()[-1].startswith("#CHROM")


def test_caller_homozygous_hand_example():
    doc = toy_call([read("chr1", 1, "ATGT", i) for i in range(3)], Reference({"chr1": "ACGT"}))
    assert calls_of(doc.records) == [("chr1", 2, "C", "T", "1/1")]
    r = doc.records[0]
    assert r.qual == 60 and r.info == "DP=3;AF=1.0000"


def test_caller_heterozygous_hand_example():
    reads = [read("chr1", 1, s, i) for i, s in enumerate(["ATGT", "ATGT", "ACGT", "ACGT"])]
    doc = toy_call(reads, Reference({"chr1": "ACGT"}))
    assert calls_of(doc.records) == [("chr1", 2, "C", "T", "0/1")]
    assert doc.records[0].qual == 3  # -10 log10(0.5) = 3.01


def test_caller_thresholds_and_ties():
    ref = Reference({"c": "AAAA"})
    # single read: depth 1 < min_depth 2
    assert toy_call([read("c", 1, "AGAA")], ref).records == []
    # G and C tie at 2 of 4: lexically smaller C wins
    reads = [read("c", 1, s, i) for i, s in enumerate(["AGAA", "AGAA", "ACAA", "ACAA"])]
    assert calls_of(toy_call(reads, ref).records) == [("c", 2, "A", "C", "0/1")]
    # 1 of 3 alt is below alt_fraction 0.5
    reads = [read("c", 1, s, i) for i, s in enumerate(["AGAA", "AAAA", "AAAA"])]
    assert toy_call(reads, ref).records == []
    # custom params
    p = CallerParams(min_depth=1, alt_fraction=0.3, hom_fraction=0.9)
    assert calls_of(toy_call(reads, ref, p).records) == [("c", 2, "A", "G", "0/1")]


def test_caller_ignores_n():
    ref = Reference({"c": "ANAA"})
    reads = [read("c", 1, "GTNA", i) for i in range(3)]
    # position 2 has reference N: never called; read N bases do not count toward depth
    assert calls_of(toy_call(reads, ref).records) == [("c", 1, "A", "G", "1/1")]


def test_caller_bounds_errors():
    ref = Reference({"c": "ACGT"})
    with pytest.raises(ReferenceBoundsError):
        toy_call([read("c", 2, "CGTA")], ref)
    with pytest.raises(ReferenceBoundsError):
        toy_call([read("z", 1, "A")], ref)
    with pytest.raises(GenomicsError):
        Reference({"c": "ACGU"})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_caller_matches_counter_pileup_oracle(seed):
    rng = random.Random(seed)
    ref = Reference({c: "".join(rng.choice("ACGTN" if rng.random() < 0.1 else "ACGT") for _ in range(40))
                     for c in ("c1", "c2")})
    reads = []
    for i in range(rng.randint(0, 40)):
        c = rng.choice(["c1", "c2"])
        L = rng.randint(1, 10)
        pos = rng.randint(1, 41 - L)
        reads.append((c, pos, "".join(rng.choice("ACGTN") for _ in range(L))))
    doc = toy_call([read(c, p, s, i) for i, (c, p, s) in enumerate(reads)], ref)
    got = [(r.chrom, r.pos, r.ref_base, r.alt_base, r.genotype, r.qual) for r in doc.records]
    assert got == oracles.pileup_calls(reads, ref)


def test_caller_is_deterministic(small_data):
    a = write_vcf(toy_call(small_data.reads, small_data.reference))
    b = write_vcf(toy_call(list(reversed(small_data.reads)), small_data.reference))
    assert a == b


# -- simulation ------------------------------------------------------------


@pytest.mark.parametrize("chroms,seed", [(1, 1), (2, 2), (3, 3)])
def test_simulated_reads_recover_planted_variants(chroms, seed):
    data = simulate(6000, 800, 60, 40, seed, num_chroms=chroms)
    planted = sorted((v.chrom, v.pos, v.ref_base, v.alt_base, v.genotype) for v in data.variants)
    assert all(min(d) >= 2 for d in data.depth.values())
    assert data.expected_calls() == planted
    assert calls_of(toy_call(data.reads, data.reference).records) == planted


def test_simulated_size_close_to_target():
    data = simulate_fastq_size(500_000, seed=4)
    size = len(write_fastq(data.reads))
    assert 0.9 * 500_000 <= size <= 1.1 * 500_000
    assert calls_of(toy_call(data.reads, data.reference).records) == data.expected_calls()


def test_reference_fasta_round_trip(small_data):
    ref = small_data.reference
    assert Reference.from_fasta(ref.to_fasta()) == ref
    assert Reference.from_fasta(ref.to_fasta(width=7)) == ref


# -- VCF -------------------------------------------------------------------


def _doc(n, seed=0):
    rng = random.Random(seed)
    recs = []
    for chrom in ("chr1", "chr2"):
        for pos in sorted(rng.sample(range(1, 100_000), n // 2)):
            recs.append(VcfRecord(chrom, pos, ".", "A", rng.choice("CGT"), rng.randint(0, 60), "PASS",
                                  rng.choice(["0/1", "1/1"])))
    return VcfDocument(records=recs)


def test_vcf_round_trip():
    empty = VcfDocument()
    assert parse_vcf(write_vcf(empty)) == empty
    doc = _doc(20)
    assert parse_vcf(write_vcf(doc)) == doc
    assert write_vcf(parse_vcf(write_vcf(doc))) == write_vcf(doc)


def test_vcf_errors():
    head = "##fileformat=VCFv4.2\n#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT\ts\n"
    with pytest.raises(VcfParseError) as ei:
        parse_vcf(head + "chr1\t5\t.\n")
    assert ei.value.line == 3
    with pytest.raises(VcfParseError):
        parse_vcf("chr1\t1\t.\tA\tC\t.\tPASS\t.\tGT\t0/1\n")
    with pytest.raises(VcfParseError):
        parse_vcf(head + "chr1\tx\t.\tA\tC\t.\tPASS\t.\tGT\t0/1\n")
    doc = parse_vcf(head + "chr1\t9\t.\tA\tC\t.\tPASS\t.\tGT\t0/1\nchr1\t3\t.\tA\tC\t.\tPASS\t.\tGT\t0/1\n")
    assert doc.unsorted_lines == [4]
    with pytest.raises(VcfParseError):
        filter_vcf(doc, FilterPolicy(mode="count", max_records=1))


def test_filter_empty_regions_gives_zero_records():
    out = filter_vcf(_doc(100), FilterPolicy(regions=(), mode="region"))
    assert out.records == []
    assert out.meta[-1].startswith("##dsgd_filter=")


def test_filter_count_identity():
    doc = _doc(100)
    assert filter_vcf(doc, FilterPolicy(max_records=len(doc), mode="count")).records == doc.records
    assert filter_vcf(doc, FilterPolicy(max_records=0, mode="count")).records == []


@pytest.mark.parametrize("mode", ["region", "count", "both"])
def test_filter_matches_linear_scan_on_1000_records(mode):
    doc = _doc(1000, seed=3)
    rng = random.Random(5)
    regions = []
    for _ in range(25):
        c = rng.choice(["chr1", "chr2"])
        s = rng.randint(1, 99_000)
        regions.append((c, s, s + rng.randint(0, 4000)))
    policy = FilterPolicy(regions=tuple(regions), max_records=137, mode=mode)
    got = filter_vcf(doc, policy).records
    rows = [(r.chrom, r.pos, r) for r in doc.records]
    assert got == [r for _, _, r in oracles.region_filter(rows, regions, 137, mode)]


def test_full_genome_region_is_identity(small_data):
    doc = toy_call(small_data.reads, small_data.reference)
    everything = tuple((c, 1, len(s)) for c, s in small_data.reference.items())
    assert filter_vcf(doc, FilterPolicy(regions=everything)).records == doc.records


def test_policy_validation_and_region_parsing():
    assert FilterPolicy.parse_regions("chr1:100-200, chr2:5-5") == (("chr1", 100, 200), ("chr2", 5, 5))
    assert FilterPolicy.parse_regions("") == ()
    with pytest.raises(ValueError):
        FilterPolicy.parse_regions("chr1:100")
    with pytest.raises(ValueError):
        FilterPolicy(regions=(("c", 5, 4),))
    with pytest.raises(ValueError):
        FilterPolicy(max_records=-1, mode="count")
    with pytest.raises(ValueError):
        FilterPolicy(mode="all")


# -- gzip ------------------------------------------------------------------


def test_gzip_round_trips():
    assert gzip_decompress(gzip_compress(b"")) == b""
    rng = np.random.default_rng(1)
    big = b"".join(write_vcf(_doc(400, seed=int(s))) for s in rng.integers(0, 1000, 60))
    big = (big * (10_000_000 // len(big) + 1))[:10_000_000]
    blob = gzip_compress(big)
    assert gzip_decompress(blob) == big
    assert blob[:4] == b"\x1f\x8b\x08\x00" and blob[4:8] == bytes(4)  # fixed mtime
    assert gzip_compress(big) == blob


def test_gzip_corruption_detected():
    blob = gzip_compress(b"hello world" * 100)
    with pytest.raises(GzipError):
        gzip_decompress(blob[:-9])
    with pytest.raises(GzipError):
        gzip_decompress(b"not gzip")
