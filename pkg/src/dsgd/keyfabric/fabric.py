"""Simulated key-management layer: link key pools, KMS routing, key relay, KSA supply."""

from __future__ import annotations

import contextlib
import threading
from collections import deque
from dataclasses import dataclass, field

from ..bitops import xor_bytes
from ..errors import (InsufficientKeyError, NoRouteError, UnknownLinkError,
                      UnknownNodeError)
from .entropy import EntropySource
from .keys import KeyHandle
from .topology import FabricTopology, link_key


class _Pool:
    """Append-only key stream with a consumption cursor.

    The consumed prefix is zeroized and then dropped from memory; ``view``
    reports it as zeros so offsets stay meaningful.
    """

    def __init__(self):
        self._tail = bytearray()
        self.consumed = 0

    def __len__(self) -> int:
        return self.consumed + len(self._tail)

    @property
    def available(self) -> int:
        return len(self._tail)

    def append(self, material: bytes) -> None:
        self._tail += material

    def take(self, nbytes: int) -> bytes:
        out = bytes(self._tail[:nbytes])
        self._tail[:nbytes] = bytes(nbytes)
        del self._tail[:nbytes]
        self.consumed += nbytes
        return out

    def readable_consumed(self) -> int:
        # the consumed prefix is zeroized and released, nothing of it survives
        return 0

    def view(self, start: int = 0, stop: int | None = None) -> bytes:
        stop = len(self) if stop is None else min(stop, len(self))
        start = max(0, start)
        if start >= stop:
            return b""
        zeros = max(0, min(stop, self.consumed) - start)
        live = self._tail[max(0, start - self.consumed): stop - self.consumed]
        return bytes(zeros) + bytes(live)


class LinkKeyStore:
    """Key pools held at the two ends of one QKD link.

    Both endpoint pools always hold identical bytes; consuming key zeroizes
    the region at both ends.
    """

    def __init__(self, link: tuple[str, str], rate: float):
        self.link = link_key(*link)
        self.rate = rate
        self._pools = {self.link[0]: _Pool(), self.link[1]: _Pool()}
        self.sim_seconds = 0.0
        self.lock = threading.Lock()

    @property
    def consumed(self) -> int:
        return self._pools[self.link[0]].consumed

    @property
    def pool_length(self) -> int:
        return len(self._pools[self.link[0]])

    @property
    def available(self) -> int:
        return self._pools[self.link[0]].available

    def append(self, material: bytes) -> None:
        for pool in self._pools.values():
            pool.append(material)

    def take(self, nbytes: int) -> bytes:
        a, b = (self._pools[n] for n in self.link)
        out = a.take(nbytes)
        b.take(nbytes)
        return out

    def endpoint_pool(self, node: str) -> bytes:
        """Full pool as seen from ``node``; consumed bytes read as zero."""
        try:
            return self._pools[node].view()
        except KeyError:
            raise UnknownNodeError(f"{node} is not an endpoint of {self.link}") from None

    def view(self, node: str, start: int, stop: int) -> bytes:
        return self._pools[node].view(start, stop)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.lock = threading.Lock()


@dataclass
class RelayTranscript:
    """What an eavesdropper on the public channels sees for one relay."""

    src: str
    dst: str
    route: list[str]
    wire: list[bytes]  # K xor k_i for each hop, in route order


@dataclass
class RelayReceipt:
    src: str
    dst: str
    nbytes: int
    route: list[str]
    sim_seconds: float  # simulated wait for on-demand key generation


@dataclass
class LinkStatus:
    link: tuple[str, str]
    rate: float
    pool_length: int
    consumed: int
    available: int
    sim_seconds: float


@dataclass
class _Reserve:
    """Relay-delivered key held by one node's KSA for one peer."""

    pool: _Pool = field(default_factory=_Pool)
    supplied: int = 0


class KeyFabric:
    """Trusted-node key fabric.

    ``relay_key`` mints a fresh key at the source node and moves it hop by
    hop, masking it with each link's key (which is then spent). Delivered
    keys land in per-(node, peer) reserves; ``supply_key`` hands them to a
    consumer and erases the fabric's copy.
    """

    def __init__(self, topology: FabricTopology, entropy: EntropySource, *,
                 auto_generate: bool | None = None, transcript_limit: int = 256):
        self.topology = topology
        self.entropy = entropy
        self.auto_generate = topology.auto_generate if auto_generate is None else auto_generate
        self.links: dict[tuple[str, str], LinkKeyStore] = {}
        for pair, spec in topology.links.items():
            store = LinkKeyStore(pair, spec.rate)
            self.links[store.link] = store
            if spec.initial:
                store.append(entropy.draw(spec.initial))
        self.transcripts: deque[RelayTranscript] = deque(maxlen=transcript_limit)
        self._reserves: dict[tuple[str, str], _Reserve] = {}
        self._reserve_lock = threading.Lock()
        self._pair_lock = threading.RLock()

    # -- topology ---------------------------------------------------------

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.topology.nodes

    def link(self, a: str, b: str) -> LinkKeyStore:
        try:
            return self.links[link_key(a, b)]
        except KeyError:
            raise UnknownLinkError(f"no link between {a} and {b}") from None

    def _check_node(self, node: str) -> None:
        if node not in self.topology.nodes:
            raise UnknownNodeError(f"unknown node {node!r}")

    def route(self, src: str, dst: str) -> list[str]:
        """Fewest-hop path; among equals the lexically smallest node sequence."""
        self._check_node(src)
        self._check_node(dst)
        if src == dst:
            return [src]
        dist = {dst: 0}
        queue = deque([dst])
        while queue:
            node = queue.popleft()
            for nb in self.topology.neighbors(node):
                if nb not in dist:
                    dist[nb] = dist[node] + 1
                    queue.append(nb)
        if src not in dist:
            raise NoRouteError(f"no route from {src} to {dst}")
        path = [src]
        while path[-1] != dst:
            here = path[-1]
            path.append(min(nb for nb in self.topology.neighbors(here)
                            if dist.get(nb) == dist[here] - 1))
        return path

    # -- link keys --------------------------------------------------------

    def generate_link_keys(self, link: tuple[str, str], nbytes: int) -> None:
        store = self.link(*link)
        if nbytes < 0:
            raise ValueError("nbytes must be >= 0")
        with store.lock:
            self._generate(store, nbytes)

    def _generate(self, store: LinkKeyStore, nbytes: int) -> float:
        if nbytes == 0:
            return 0.0
        store.append(self.entropy.draw(nbytes))
        secs = nbytes / store.rate if store.rate > 0 else float("inf")
        store.sim_seconds += secs
        return secs

    # -- relay ------------------------------------------------------------

    def relay_key(self, src: str, dst: str, nbytes: int, *,
                  src_consumer: str | None = None,
                  dst_consumer: str | None = None) -> tuple[KeyHandle, KeyHandle]:
        """Relay ``nbytes`` of fresh key from ``src`` to ``dst``; return one handle per end."""
        return self.relay_pairs([(src, dst, nbytes)], src_consumer=src_consumer, dst_consumer=dst_consumer)[0]

    def relay_pairs(self, requests: list[tuple[str, str, int]], *, src_consumer: str | None = None,
                    dst_consumer: str | None = None) -> list[tuple[KeyHandle, KeyHandle]]:
        """All-or-nothing :meth:`relay_many`, then both ends' handles for each request.

        Relay and supply run under one lock so concurrent callers on the same
        pair of nodes cannot pick up each other's halves.
        """
        with self._pair_lock:
            self.relay_many(requests)
            return [(self.supply_key(src, src_consumer or src, n, peer=dst),
                     self.supply_key(dst, dst_consumer or dst, n, peer=src))
                    for src, dst, n in requests]

    def relay_to_reserve(self, src: str, dst: str, nbytes: int) -> RelayReceipt:
        return self.relay_many([(src, dst, nbytes)])[0]

    def relay_many(self, requests: list[tuple[str, str, int]]) -> list[RelayReceipt]:
        """Relay several keys as one unit: either every relay happens or none does.

        Link shortfalls are summed over all requests before any link key is
        spent, so routes that share a link are checked against its combined load.
        """
        plans = []
        for src, dst, nbytes in requests:
            if nbytes < 0:
                raise ValueError("nbytes must be >= 0")
            route = self.route(src, dst)
            if len(route) == 1:
                raise NoRouteError(f"relay from {src} to itself")
            plans.append((src, dst, nbytes, route,
                          [self.link(route[i], route[i + 1]) for i in range(len(route) - 1)]))
        load: dict[tuple[str, str], int] = {}
        involved = {}
        for *_, nbytes, _, stores in plans:
            for store in stores:
                load[store.link] = load.get(store.link, 0) + nbytes
                involved[store.link] = store
        receipts = []
        with contextlib.ExitStack() as stack:
            # fixed lock order keeps concurrent relays deadlock-free
            for link in sorted(involved):
                stack.enter_context(involved[link].lock)
            for link in sorted(involved):
                store = involved[link]
                if load[link] > store.available and (not self.auto_generate or store.rate <= 0):
                    raise InsufficientKeyError(
                        f"link {link[0]}-{link[1]} holds {store.available} "
                        f"unconsumed bytes, relay needs {load[link]}", link=link)
            wait = 0.0
            for link in sorted(involved):
                short = load[link] - involved[link].available
                if short > 0:
                    wait = max(wait, self._generate(involved[link], short))
            for src, dst, nbytes, route, stores in plans:
                key = self.entropy.draw(nbytes)
                carried = key
                wire = []
                for store in stores:
                    hop_key = store.take(nbytes)
                    masked = xor_bytes(carried, hop_key)
                    wire.append(masked)
                    carried = xor_bytes(masked, hop_key)  # next node unmasks
                if self.transcripts.maxlen:
                    self.transcripts.append(RelayTranscript(src, dst, route, wire))
                with self._reserve_lock:
                    self._reserve(src, dst).pool.append(key)
                    self._reserve(dst, src).pool.append(carried)
                receipts.append(RelayReceipt(src, dst, nbytes, route, wait))
        return receipts

    def _reserve(self, node: str, peer: str) -> _Reserve:
        return self._reserves.setdefault((node, peer), _Reserve())

    # -- supply -----------------------------------------------------------

    def reserve_available(self, node: str, peer: str) -> int:
        res = self._reserves.get((node, peer))
        return res.pool.available if res else 0

    def reserve_view(self, node: str, peer: str) -> bytes:
        """Everything ever delivered to ``node`` for ``peer``; supplied bytes read as zero."""
        res = self._reserves.get((node, peer))
        return res.pool.view() if res else b""

    def supply_key(self, node: str, consumer: str, nbytes: int, *, peer: str) -> KeyHandle:
        """Hand ``nbytes`` of reserve key to ``consumer``; the fabric's copy is erased."""
        self._check_node(node)
        with self._pair_lock, self._reserve_lock:
            res = self._reserve(node, peer)
            if nbytes > res.pool.available:
                raise InsufficientKeyError(
                    f"{node} holds {res.pool.available} bytes of key for {peer}, {nbytes} requested")
            material = res.pool.take(nbytes)
            res.supplied += nbytes
        return KeyHandle(material, owner=consumer)

    # -- inspection -------------------------------------------------------

    def status(self) -> list[LinkStatus]:
        return [LinkStatus(s.link, s.rate, s.pool_length, s.consumed, s.available, s.sim_seconds)
                for _, s in sorted(self.links.items())]

    def readable_consumed_bytes(self) -> int:
        """Non-zero bytes found in any consumed link or supplied reserve region."""
        total = 0
        for store in self.links.values():
            total += sum(pool.readable_consumed() for pool in store._pools.values())
        for res in self._reserves.values():
            total += res.pool.readable_consumed()
        return total

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_reserve_lock"]
        del state["_pair_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._reserve_lock = threading.Lock()
        self._pair_lock = threading.RLock()
