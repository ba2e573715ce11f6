"""The trusted analysis server: deposit, grants, and request handling.

A deposit splits the FASTQ into shares A, B and C. A stays with the data
owner (co-located with the server); B and C travel over OTP channels to
their holders. A request fetches B or C back, rebuilds the FASTQ inside the
protected area, calls variants, filters them to the user's grant and
delivers the filtered, compressed VCF. Plaintext never outlives the request.
"""

from __future__ import annotations

import hashlib
import itertools
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable

from ..errors import (ChecksumMismatchError, HolderUnreachableError, NoGrantError,
                      ServerError, UnknownDatasetError)
from ..genomics import (CallerParams, FilterPolicy, Reference, filter_vcf, gzip_compress,
                        gzip_decompress, parse_fastq, parse_vcf, toy_call, write_vcf)
from ..keyfabric import KeyFabric, KeyHandle, KeyStatus
from ..metrics import StageMeasure, throughput, total_throughput
from ..secretshare.sharefile import DEFAULT_CHUNK, ShareBundle, combine, deal
from ..securechannel import ChannelConfig, SecureChannel, make_pipe, transfer
from .auth import KEY_BYTES_PER_SESSION, AuthPeer, authenticate_peer
from .protected import ProtectedArea

STORAGE = ("normal", "share")
TRANSFER = ("plain", "otp")


@dataclass
class NodeStore:
    """Persistent storage at one node."""

    node: str
    blobs: dict[str, bytes] = field(default_factory=dict)
    reachable: bool = True

    def put(self, name: str, data: bytes) -> None:
        self.blobs[name] = bytes(data)

    def get(self, name: str) -> bytes:
        try:
            return self.blobs[name]
        except KeyError:
            raise ServerError(f"{self.node} holds no {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self.blobs)


@dataclass(frozen=True)
class DepositRecord:
    dataset_id: str
    owner: str
    placements: dict[str, str]  # share label -> node
    original_size: int
    padded_size: int
    checksum: str  # sha256 of the plaintext, owner side only
    normal_copy: bool = False


@dataclass(frozen=True)
class AccessGrant:
    user: str
    dataset_id: str
    policy: FilterPolicy
    expiry: float | None = None

    def active(self, now: float) -> bool:
        return self.expiry is None or now < self.expiry


@dataclass
class PipelineTrace:
    dataset_id: str
    user: str
    storage: str
    transfer: str
    holder: str | None
    fastq_bytes: int = 0
    stages: list[StageMeasure] = field(default_factory=list)
    records_called: int = 0
    records_delivered: int = 0

    @property
    def total_seconds(self) -> float:
        return sum(s.seconds for s in self.stages)

    @property
    def total_mbps(self) -> float:
        return total_throughput(self.fastq_bytes, self.total_seconds)

    def stage(self, name: str) -> StageMeasure:
        for s in self.stages:
            if s.stage == name:
                return s
        raise KeyError(name)


class _Timer:
    def __init__(self):
        self.seconds = 0.0

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        # guard against a zero reading from a coarse clock
        self.seconds = max(time.perf_counter() - self._t0, 1e-9)


class TrustedServer:
    def __init__(self, fabric: KeyFabric, entropy, *, node: str = "node1",
                 holders: dict[str, str] | None = None,
                 area: ProtectedArea | None = None,
                 caller: CallerParams = CallerParams(),
                 channel: ChannelConfig = ChannelConfig(),
                 chunk_size: int = DEFAULT_CHUNK,
                 clock: Callable[[], float] = time.time):
        self.fabric = fabric
        self.entropy = entropy
        self.node = node
        self.holders = dict(holders or {"B": "node2", "C": "node3"})
        if set(self.holders) != {"B", "C"}:
            raise ServerError("holders must name exactly B and C")
        if len({node, *self.holders.values()}) != 3:
            raise ServerError("owner and the two holders must be distinct nodes")
        for n in (node, *self.holders.values()):
            fabric._check_node(n)
        self.area = area or ProtectedArea()
        self.caller = caller
        self.channel = channel
        self.chunk_size = chunk_size
        self.clock = clock
        self.stores = {n: NodeStore(n) for n in fabric.nodes}
        self.deposits: dict[str, DepositRecord] = {}
        self.references: dict[str, Reference] = {}
        self.grants: dict[tuple[str, str], AccessGrant] = {}
        self.users: dict[str, str] = {}
        self.handles: list[KeyHandle] = []
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    # -- bookkeeping ------------------------------------------------------

    def _next(self, prefix: str) -> str:
        with self._lock:
            return f"{prefix}{next(self._ids):04d}"

    def set_reachable(self, node: str, reachable: bool) -> None:
        self.stores[node].reachable = reachable

    def record(self, dataset_id: str) -> DepositRecord:
        try:
            return self.deposits[dataset_id]
        except KeyError:
            raise UnknownDatasetError(f"no dataset {dataset_id!r}") from None

    def readable_consumed_key_bytes(self) -> int:
        return self.fabric.readable_consumed_bytes() + sum(h.readable_consumed() for h in self.handles)

    # -- keys and channels ------------------------------------------------

    def _provision(self, links: list[tuple[str, str, int]]) -> list[tuple[KeyHandle, KeyHandle]]:
        """Relay all keys as one unit, then hand each end its handle."""
        links = [l for l in links if l[2] > 0]
        out = self.fabric.relay_pairs(links)
        with self._lock:
            # erased handles have nothing left to inspect
            self.handles = [h for h in self.handles if h.status is not KeyStatus.ERASED]
            self.handles.extend(h for pair in out for h in pair)
        return out

    def _config(self, src: str, dst: str, encrypt: bool) -> ChannelConfig:
        return replace(self.channel, encryption=encrypt, local=src, peer=dst)

    def _key_need(self, nbytes: int) -> int:
        return replace(self.channel, encryption=True).key_bytes_for(nbytes)

    def _send(self, src: str, dst: str, data: bytes, keys: tuple[KeyHandle, KeyHandle] | None) -> bytes:
        for n in (src, dst):
            if not self.stores[n].reachable:
                raise HolderUnreachableError(f"node {n} is unreachable")
        cfg = self._config(src, dst, keys is not None)
        tx = SecureChannel(cfg, keys[0] if keys else None)
        rx = SecureChannel(cfg, keys[1] if keys else None)
        return transfer(tx, rx, data, make_pipe(cfg))

    def _authenticate(self, a: str, b: str) -> None:
        (ka, kb), = self._provision([(a, b, KEY_BYTES_PER_SESSION)])
        try:
            authenticate_peer(AuthPeer(a, ka, self.entropy), AuthPeer(b, kb, self.entropy))
        finally:
            ka.erase()
            kb.erase()

    # -- deposit ----------------------------------------------------------

    def deposit(self, fastq: bytes, reference: Reference, *, dataset_id: str | None = None,
                keep_normal: bool = False) -> DepositRecord:
        """Share ``fastq``, ship B and C to their holders, keep A at the owner.

        With ``keep_normal`` the owner also keeps the plaintext, which only
        the ``normal`` storage condition of a benchmark needs.
        """
        dataset_id = dataset_id or self._next("ds")
        if dataset_id in self.deposits:
            raise ServerError(f"dataset {dataset_id!r} already deposited")
        for label, n in self.holders.items():
            if not self.stores[n].reachable:
                raise HolderUnreachableError(f"holder {label} ({n}) is unreachable")
        region = f"deposit:{dataset_id}"
        handles: list[KeyHandle] = []
        try:
            plain = self.area.put(f"{region}:fastq", fastq, region=region)
            checksum = hashlib.sha256(plain).hexdigest()
            bundles = deal(bytes(plain), self.entropy, chunk_size=self.chunk_size)
            blobs = {lab: bundles[lab].to_bytes() for lab in ("B", "C")}
            keys = self._provision([(self.node, self.holders[lab], self._key_need(len(blobs[lab])))
                                    for lab in ("B", "C")])
            handles = [h for pair in keys for h in pair]
            for (lab, blob), pair in zip(blobs.items(), keys):
                received = self._send(self.node, self.holders[lab], blob, pair)
                self.stores[self.holders[lab]].put(f"{dataset_id}.share{lab}", received)
            owner = self.stores[self.node]
            owner.put(f"{dataset_id}.shareA", bundles["A"].to_bytes())
            if keep_normal:
                owner.put(f"{dataset_id}.fastq", plain)
            padded = sum(2 * len(c.part1) for c in bundles["A"].chunks)
            rec = DepositRecord(dataset_id, self.node, {"A": self.node, **self.holders},
                                len(plain), padded, checksum, keep_normal)
            self.deposits[dataset_id] = rec
            self.references[dataset_id] = reference
            return rec
        finally:
            for h in handles:
                h.erase()
            self.area.release(region)
            self.area.scrub()

    # -- grants -----------------------------------------------------------

    def grant(self, user: str, dataset_id: str, policy: FilterPolicy, *,
              node: str | None = None, expiry: float | None = None) -> AccessGrant:
        """Create or replace the grant for (user, dataset)."""
        self.record(dataset_id)
        if node is not None:
            self.fabric._check_node(node)
        with self._lock:
            if node is not None:
                self.users[user] = node
            self.users.setdefault(user, self.fabric.nodes[-1])
            g = AccessGrant(user, dataset_id, policy, expiry)
            self.grants[(user, dataset_id)] = g
            return g

    def revoke(self, user: str, dataset_id: str) -> None:
        with self._lock:
            self.grants.pop((user, dataset_id), None)

    def _active_grant(self, user: str, dataset_id: str) -> AccessGrant:
        g = self.grants.get((user, dataset_id))
        if g is None or not g.active(self.clock()):
            raise NoGrantError(f"{user} holds no active grant for {dataset_id}")
        return g

    def _pick_holder(self, holder: str | None) -> str:
        if holder is not None:
            if holder not in self.holders:
                raise ServerError(f"holder must be B or C, not {holder!r}")
            if not self.stores[self.holders[holder]].reachable:
                raise HolderUnreachableError(f"holder {holder} ({self.holders[holder]}) is unreachable")
            return holder
        for label in ("B", "C"):
            if self.stores[self.holders[label]].reachable:
                return label
        raise HolderUnreachableError("neither share holder is reachable")

    # -- requests ---------------------------------------------------------

    def handle_request(self, user: str, dataset_id: str, *, storage: str = "share",
                       transfer: str = "otp", holder: str | None = None) -> tuple[bytes, PipelineTrace]:
        """Run the analysis for ``user`` and return the delivered VCF.gz bytes with a trace.

        Key relay and authentication happen before the clock starts; stage
        times cover share fetch and rebuild (inside A), calling and
        compression (A), decompress (B1), filter (B2), recompress (B3) and
        delivery (C).
        """
        if storage not in STORAGE or transfer not in TRANSFER:
            raise ServerError(f"storage must be one of {STORAGE} and transfer one of {TRANSFER}")
        rec = self.record(dataset_id)
        grant = self._active_grant(user, dataset_id)
        user_node = self.users[user]
        otp = transfer == "otp"
        label = self._pick_holder(holder) if storage == "share" else None
        if storage == "normal" and not rec.normal_copy:
            raise ServerError(f"{dataset_id} was deposited without a normal copy")

        trace = PipelineTrace(dataset_id, user, storage, transfer, label)
        region = self._next("req")
        area = self.area
        handles: list[KeyHandle] = []

        def keep(name: str, data: bytes, kind: str = "plaintext") -> bytearray:
            return area.put(f"{region}:{name}", data, region=region, kind=kind)

        try:
            self._authenticate(self.node, user_node)
            fetch_keys = None
            if label is not None:
                hnode = self.holders[label]
                self._authenticate(self.node, hnode)
                share_blob = self.stores[hnode].get(f"{dataset_id}.share{label}")
                if otp:
                    fetch_keys, = self._provision([(hnode, self.node, self._key_need(len(share_blob)))])
                    handles += fetch_keys

            with _Timer() as t_a:
                if label is not None:
                    got = self._send(self.holders[label], self.node, share_blob, fetch_keys)
                    keep("share", got, kind="share")
                    own = ShareBundle.from_bytes(self.stores[self.node].get(f"{dataset_id}.shareA"))
                    fastq = keep("fastq", combine(own, ShareBundle.from_bytes(got)))
                    if hashlib.sha256(fastq).hexdigest() != rec.checksum:
                        raise ChecksumMismatchError(f"rebuilt {dataset_id} does not match its checksum")
                else:
                    fastq = keep("fastq", self.stores[self.node].get(f"{dataset_id}.fastq"))
                doc = toy_call(parse_fastq(bytes(fastq)), self.references[dataset_id], self.caller, sample=dataset_id)
                vcf = keep("vcf", write_vcf(doc))
                vcf_gz = keep("vcf.gz", gzip_compress(bytes(vcf)))
            trace.fastq_bytes = len(fastq)
            trace.records_called = len(doc.records)
            trace.stages.append(StageMeasure("A", len(fastq), len(vcf), t_a.seconds))
            area.remove(f"{region}:fastq")

            with _Timer() as t_b1:
                vcf2 = keep("vcf2", gzip_decompress(bytes(vcf_gz)))
            trace.stages.append(StageMeasure("B1", len(vcf_gz), len(vcf2), t_b1.seconds))

            with _Timer() as t_b2:
                fdoc = filter_vcf(parse_vcf(bytes(vcf2)), grant.policy)
                fvcf = keep("fvcf", write_vcf(fdoc))
            trace.records_delivered = len(fdoc.records)
            trace.stages.append(StageMeasure("B2", len(vcf2), len(fvcf), t_b2.seconds))

            with _Timer() as t_b3:
                fgz = keep("fvcf.gz", gzip_compress(bytes(fvcf)))
            trace.stages.append(StageMeasure("B3", len(fvcf), len(fgz), t_b3.seconds))

            deliver_keys = None
            if otp:
                deliver_keys, = self._provision([(self.node, user_node, self._key_need(len(fgz)))])
                handles += deliver_keys
            with _Timer() as t_c:
                delivered = self._send(self.node, user_node, bytes(fgz), deliver_keys)
            trace.stages.append(StageMeasure("C", len(fgz), len(delivered), t_c.seconds))
            return delivered, trace
        finally:
            for h in handles:
                h.erase()
            area.release(region)
            area.scrub()

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        state["handles"] = []
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()


def request_mbps(trace: PipelineTrace) -> dict[str, float]:
    out = {s.stage: throughput(s.stage, s) for s in trace.stages}
    out["total"] = trace.total_mbps
    return out
