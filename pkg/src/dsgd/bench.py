"""Benchmark drivers: the storage/transfer condition matrix and the OTP transport matrix.

Wall-clock numbers depend on the machine; what the reports pin down is the
row structure, the formulas, and the relative cost of sharing and OTP.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field, replace

from .errors import BenchError, DsgdError, FabricError
from .genomics import FilterPolicy
from .keyfabric import FabricTopology, KeyFabric, KeyHandle, SeededEntropy
from .metrics import STAGES, StageMeasure, mbps, throughput, total_throughput
from .securechannel import ChannelConfig, SecureChannel, make_pipe
from .trustedserver import PipelineTrace, TrustedServer

__all__ = [
    "STAGES", "StageMeasure", "mbps", "throughput", "total_throughput",
    "ThroughputRow", "ThroughputReport", "run_matrix",
    "OtpRow", "OtpTransportReport", "run_otp_transport", "render_table",
]

CONDITIONS = (("normal", "plain"), ("share", "plain"), ("share", "otp"), ("normal", "otp"))


def render_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths])] + [line(r) for r in rows]) + "\n"


def _fmt(v, spec: str) -> str:
    return "FAILED" if v is None else format(v, spec)


# -- condition matrix -------------------------------------------------------


@dataclass
class ThroughputRow:
    stage: str
    storage: str
    transfer: str
    extraction: str
    volume_bytes: int | None
    time_s: float | None
    mbps: float | None
    error: str = ""

    @property
    def volume_mb(self) -> float | None:
        return None if self.volume_bytes is None else self.volume_bytes / 1e6


@dataclass
class ThroughputReport:
    dataset_id: str
    fastq_bytes: int
    records_called: int
    rows: list[ThroughputRow] = field(default_factory=list)
    extractions: dict[str, int] = field(default_factory=dict)  # label -> max_records
    delivered: dict[tuple[str, str, str], bytes] = field(default_factory=dict, repr=False)

    COLUMNS = ["stage", "storage", "transfer", "extraction", "volume_MB", "time_s", "mbps"]

    def total(self, storage: str, transfer: str, extraction: str) -> ThroughputRow:
        for r in self.rows:
            if (r.stage, r.storage, r.transfer, r.extraction) == ("total", storage, transfer, extraction):
                return r
        raise KeyError((storage, transfer, extraction))

    def overhead_ratio(self, extraction: str) -> float | None:
        """Total throughput of share/OTP over normal/plain."""
        a = self.total("share", "otp", extraction).mbps
        b = self.total("normal", "plain", extraction).mbps
        return None if a is None or b is None else a / b

    def table_rows(self) -> list[list[str]]:
        return [[r.stage, r.storage, r.transfer, r.extraction, _fmt(r.volume_mb, ".6f"),
                 _fmt(r.time_s, ".9g"), _fmt(r.mbps, ".3f") if not r.error else f"FAILED ({r.error})"]
                for r in self.rows]

    def to_tsv(self) -> str:
        return "\n".join("\t".join(r) for r in [self.COLUMNS] + self.table_rows()) + "\n"

    def to_text(self) -> str:
        out = render_table(self.COLUMNS, self.table_rows())
        for label in self.extractions:
            ratio = self.overhead_ratio(label)
            out += f"share/otp vs normal/plain total throughput ({label}): {_fmt(ratio, '.3f')}\n"
        return out


def _best(traces: list[PipelineTrace]) -> PipelineTrace:
    return min(traces, key=lambda t: t.total_seconds)


def run_matrix(server: TrustedServer, dataset_id: str, levels=(0.0, 0.01, 0.5, 1.0), *,
               user: str = "bench", repeats: int = 3, conditions=CONDITIONS,
               holder: str | None = None) -> ThroughputReport:
    """Run every (storage, transfer) condition at every extraction level.

    ``levels`` are fractions of the full call set; each becomes a count-mode
    grant of ``round(level * calls)`` records. Each cell runs ``repeats``
    times and reports its fastest run, to keep scheduler noise out of the
    comparison between conditions.
    """
    rec = server.record(dataset_id)
    server.grant(user, dataset_id, FilterPolicy(mode="count", max_records=0))
    _, probe = server.handle_request(user, dataset_id, storage="share", transfer="plain", holder=holder)
    calls = probe.records_called
    report = ThroughputReport(dataset_id, rec.original_size, calls)
    for level in levels:
        if not 0 <= level <= 1:
            raise BenchError(f"extraction level {level} outside [0, 1]")
        n = round(level * calls)
        label = f"extracted {n}"
        report.extractions[label] = n
        server.grant(user, dataset_id, FilterPolicy(mode="count", max_records=n))
        for storage, transfer in conditions:
            try:
                runs = []
                for _ in range(repeats):
                    out, trace = server.handle_request(user, dataset_id, storage=storage,
                                                       transfer=transfer, holder=holder)
                    runs.append(trace)
                report.delivered[(storage, transfer, label)] = out
            except DsgdError as exc:
                for stage in STAGES:
                    report.rows.append(ThroughputRow(stage, storage, transfer, label, None, None, None,
                                                     exc.code))
                continue
            best = _best(runs)
            for s in best.stages:
                report.rows.append(ThroughputRow(s.stage, storage, transfer, label, s.volume_bytes,
                                                 s.seconds, throughput(s.stage, s)))
            report.rows.append(ThroughputRow("total", storage, transfer, label, best.fastq_bytes,
                                             best.total_seconds, best.total_mbps))
    return report


# -- OTP transport matrix ---------------------------------------------------


@dataclass
class OtpRow:
    transport: str
    header_encryption: bool
    encryption: str  # "OTP" or "plain"
    mtu: int
    run: int
    gbps: float | None
    error: str = ""


@dataclass
class OtpTransportReport:
    payload_bytes: int
    rows: list[OtpRow] = field(default_factory=list)

    CELLS = [(tr, hdr, enc) for tr in ("stream", "datagram") for enc in ("OTP", "plain")
             for hdr in (False, True)]

    def cell(self, transport: str, header_encryption: bool, encryption: str) -> list[OtpRow]:
        return [r for r in self.rows
                if (r.transport, r.header_encryption, r.encryption) == (transport, header_encryption, encryption)]

    def average(self, transport: str, header_encryption: bool, encryption: str) -> float | None:
        vals = [r.gbps for r in self.cell(transport, header_encryption, encryption)]
        if not vals or any(v is None for v in vals):
            return None
        return statistics.fmean(vals)

    def _grid(self) -> tuple[list[str], list[list[str]]]:
        cells = [(h, e) for e in ("OTP", "plain") for h in (False, True)]
        header = ["", *[f"{e} hdr={'YES' if h else 'NO'}" for h, e in cells]]
        present = [tr for tr in ("stream", "datagram") if any(self.cell(tr, h, e) for h, e in cells)]
        mtus = {(r.header_encryption, r.encryption): r.mtu for r in self.rows}
        rows = [["mtu", *[str(mtus.get((h, e), "-")) for h, e in cells]]]
        for tr in present:
            runs = max((len(self.cell(tr, h, e)) for h, e in cells), default=0)
            for i in range(runs):
                rows.append([f"{tr} {i + 1}", *[_fmt(self.cell(tr, h, e)[i].gbps, ".3f") if self.cell(tr, h, e)
                                                else "-" for h, e in cells]])
            rows.append([f"{tr} avg", *[_fmt(self.average(tr, h, e), ".3f") if self.cell(tr, h, e)
                                        else "-" for h, e in cells]])
        return header, rows

    def to_text(self) -> str:
        return f"payload {self.payload_bytes} bytes, Gbit/s\n" + render_table(*self._grid())

    def to_tsv(self) -> str:
        lines = ["transport\theader_encryption\tencryption\tmtu\trun\tgbps"]
        for r in self.rows:
            lines.append(f"{r.transport}\t{'yes' if r.header_encryption else 'no'}\t{r.encryption}\t"
                         f"{r.mtu}\t{r.run}\t{_fmt(r.gbps, '.6f') if not r.error else 'FAILED'}")
        for tr, hdr, enc in self.CELLS:
            if not self.cell(tr, hdr, enc):
                continue
            lines.append(f"{tr}\t{'yes' if hdr else 'no'}\t{enc}\t{self.cell(tr, hdr, enc)[0].mtu}\t"
                         f"avg\t{_fmt(self.average(tr, hdr, enc), '.6f')}")
        return "\n".join(lines) + "\n"


def _warm_up(base: ChannelConfig) -> None:
    """One small untimed transfer so compiled kernels are loaded before the clock runs."""
    cfg = replace(base, encryption=True)
    key = bytes(range(256)) * 64
    tx, rx = SecureChannel(cfg, KeyHandle(key)), SecureChannel(cfg, KeyHandle(key))
    rx.recv(tx.send(bytes(4096)))


def run_otp_transport(payload_bytes: int = 10_000_000, *, runs: int = 5, seed: int = 0,
                      fabric: KeyFabric | None = None, src: str | None = None, dst: str | None = None,
                      base: ChannelConfig = ChannelConfig(),
                      transports=("stream", "datagram"), header_modes=(False, True),
                      encryptions=("OTP", "plain")) -> OtpTransportReport:
    """Move ``payload_bytes`` through every transport cell ``runs`` times.

    Keys come from ``fabric`` (a fresh auto-generating two-node fabric by
    default). If the fabric runs dry only the OTP cells are marked failed.
    """
    if payload_bytes <= 0 or runs <= 0:
        raise BenchError("payload and run count must be positive")
    ent = SeededEntropy(seed)
    if fabric is None:
        fabric = KeyFabric(FabricTopology.chain(2, auto_generate=True), ent.spawn("fabric"))
    src = src or fabric.nodes[0]
    dst = dst or fabric.nodes[-1]
    payload = ent.spawn("payload").draw(payload_bytes)
    _warm_up(base)
    report = OtpTransportReport(payload_bytes)
    for transport, hdr, enc in OtpTransportReport.CELLS:
        if transport not in transports or hdr not in header_modes or enc not in encryptions:
            continue
        cfg = replace(base, transport=transport, header_encryption=hdr, encryption=enc == "OTP",
                      local=src, peer=dst)
        for run in range(1, runs + 1):
            keys = (None, None)
            try:
                if cfg.encryption:
                    need = cfg.key_bytes_for(payload_bytes)
                    keys = fabric.relay_key(src, dst, need, src_consumer="bench", dst_consumer="bench")
            except FabricError as exc:
                report.rows.append(OtpRow(transport, hdr, enc, cfg.effective_mtu, run, None, exc.code))
                continue
            tx, rx = SecureChannel(cfg, keys[0]), SecureChannel(cfg, keys[1])
            pipe = make_pipe(cfg, seed=seed + run)
            t0 = time.perf_counter()
            pipe.send(tx.send(payload))
            got = pipe.receive()
            out = rx.recv_stream(got) if transport == "stream" else rx.recv(got)
            secs = max(time.perf_counter() - t0, 1e-9)
            if out != payload:
                raise BenchError(f"{transport} hdr={hdr} {enc}: received bytes differ from sent")
            report.rows.append(OtpRow(transport, hdr, enc, cfg.effective_mtu, run,
                                      payload_bytes * 8 / 1e9 / secs))
    return report
