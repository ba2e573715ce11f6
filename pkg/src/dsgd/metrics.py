"""Stage measurements and the throughput formulas applied to them.

All sizes are in bytes, rates in Mbit/s with 1 Mbit = 10^6 bits.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BenchError

STAGES = ("A", "B1", "B2", "B3", "C", "total")


@dataclass(frozen=True)
class StageMeasure:
    stage: str
    input_bytes: int
    output_bytes: int
    seconds: float

    def __post_init__(self):
        if self.stage not in STAGES:
            raise BenchError(f"unknown stage {self.stage!r}")
        if self.input_bytes < 0 or self.output_bytes < 0:
            raise BenchError("byte counts must be >= 0")
        if not self.seconds > 0:
            raise BenchError(f"stage {self.stage} has non-positive time {self.seconds}")

    @property
    def volume_bytes(self) -> int:
        """Bytes the rate is computed over (see :func:`throughput`)."""
        if self.stage == "C":
            return self.input_bytes
        return self.input_bytes + self.output_bytes


def mbps(nbytes: int, seconds: float) -> float:
    if not seconds > 0:
        raise BenchError(f"time must be positive, got {seconds}")
    return nbytes * 8 / 1e6 / seconds


def throughput(stage: str, measure: StageMeasure) -> float:
    """(input + output) * 8 / 10^6 / seconds for A, B1, B2, B3.

    Delivery (C) counts the delivered archive once: size * 8 / 10^6 / seconds.
    ``total`` is handled by :func:`total_throughput`, which counts only the FASTQ.
    """
    if stage != measure.stage:
        raise BenchError(f"measure is for stage {measure.stage}, not {stage}")
    if stage == "total":
        return total_throughput(measure.input_bytes, measure.seconds)
    return mbps(measure.volume_bytes, measure.seconds)


def total_throughput(fastq_bytes: int, total_seconds: float) -> float:
    """FASTQ size alone over the whole request time."""
    return mbps(fastq_bytes, total_seconds)
