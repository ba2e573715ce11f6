from .caller import CallerParams, Reference, pileup, toy_call
from .fastq import FastqRecord, SimReadTag, iter_fastq, parse_fastq, write_fastq
from .gz import gzip_compress, gzip_decompress
from .simulate import PlantedVariant, SimulatedData, calls_of, simulate, simulate_fastq_size
from .vcf import FilterPolicy, VcfDocument, VcfRecord, filter_vcf, parse_vcf, write_vcf

__all__ = [
    "CallerParams", "Reference", "pileup", "toy_call",
    "FastqRecord", "SimReadTag", "iter_fastq", "parse_fastq", "write_fastq",
    "gzip_compress", "gzip_decompress",
    "PlantedVariant", "SimulatedData", "calls_of", "simulate", "simulate_fastq_size",
    "FilterPolicy", "VcfDocument", "VcfRecord", "filter_vcf", "parse_vcf", "write_vcf",
]
