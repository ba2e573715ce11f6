"""Bounded scratch space where plaintext may exist, briefly."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable

from ..errors import CapacityError, ServerError

GiB = 1 << 30
DAY = 24 * 3600.0


@dataclass
class _Entry:
    data: bytearray
    created_at: float
    region: str
    kind: str


@dataclass(frozen=True)
class EntryInfo:
    entry_id: str
    region: str
    kind: str
    size: int
    created_at: float


class ProtectedArea:
    """Capacity-bounded plaintext store with zeroize-on-remove and an age limit.

    Every entry belongs to a region (one per request or deposit) so that
    concurrent requests never touch each other's plaintext and a whole
    request can be released in one call.
    """

    def __init__(self, capacity: int = GiB, ttl: float = DAY, clock: Callable[[], float] = time.time):
        if capacity <= 0 or ttl <= 0:
            raise ValueError("capacity and ttl must be positive")
        self.capacity = capacity
        self.ttl = ttl
        self.clock = clock
        self._entries: dict[str, _Entry] = {}
        self._used = 0
        self._lock = threading.Lock()
        self._timer: threading.Timer | None = None
        self.removed_total = 0

    @property
    def used(self) -> int:
        return self._used

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._entries

    def put(self, entry_id: str, data: bytes | bytearray | memoryview, *, region: str = "",
            kind: str = "plaintext", now: float | None = None) -> bytearray:
        """Copy ``data`` in; the returned buffer is the stored one (zeroized on removal)."""
        with self._lock:
            if entry_id in self._entries:
                raise ServerError(f"protected entry {entry_id!r} already exists")
            if self._used + len(data) > self.capacity:
                raise CapacityError(
                    f"protected area holds {self._used} of {self.capacity} bytes; "
                    f"{entry_id!r} needs {len(data)} more")
            buf = bytearray(data)
            self._entries[entry_id] = _Entry(buf, self.clock() if now is None else now, region, kind)
            self._used += len(buf)
            return buf

    def get(self, entry_id: str) -> bytearray:
        try:
            return self._entries[entry_id].data
        except KeyError:
            raise ServerError(f"no protected entry {entry_id!r}") from None

    def remove(self, entry_id: str) -> bool:
        with self._lock:
            return self._remove(entry_id)

    def _remove(self, entry_id: str) -> bool:
        entry = self._entries.pop(entry_id, None)
        if entry is None:
            return False
        entry.data[:] = bytes(len(entry.data))
        self._used -= len(entry.data)
        self.removed_total += 1
        return True

    def release(self, region: str) -> int:
        """Zeroize and drop every entry of ``region``."""
        with self._lock:
            ids = [k for k, e in self._entries.items() if e.region == region]
            for k in ids:
                self._remove(k)
            return len(ids)

    def scrub(self, now: float | None = None) -> int:
        """Remove entries whose age has reached the ttl (the boundary counts as expired)."""
        now = self.clock() if now is None else now
        with self._lock:
            ids = [k for k, e in self._entries.items() if now - e.created_at >= self.ttl]
            for k in ids:
                self._remove(k)
            return len(ids)

    def inspect(self) -> list[EntryInfo]:
        with self._lock:
            return [EntryInfo(k, e.region, e.kind, len(e.data), e.created_at)
                    for k, e in sorted(self._entries.items())]

    def plaintext_entries(self) -> int:
        return sum(1 for e in self.inspect() if e.kind == "plaintext")

    # -- periodic scrub ---------------------------------------------------

    def start_timer(self, interval: float) -> None:
        self.stop_timer()

        def tick():
            self.scrub()
            self.start_timer(interval)

        self._timer = threading.Timer(interval, tick)
        self._timer.daemon = True
        self._timer.start()

    def stop_timer(self) -> None:
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        state["_timer"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()
