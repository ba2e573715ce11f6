"""Single-use key material handed to the service layer."""

from __future__ import annotations

import enum
import itertools
import threading

import numpy as np

from ..errors import KeyExhaustedError, KeyReuseError, KeyStateError

_ids = itertools.count(1)


class KeyStatus(str, enum.Enum):
    AVAILABLE = "available"
    CONSUMED = "consumed"
    ERASED = "erased"


class KeyHandle:
    """A run of key bytes that can each be read exactly once.

    Reading a byte range returns the material and zeroizes it in the same
    step. The handle moves ``available -> consumed`` once every byte has been
    read (or :meth:`consume` is called) and ``consumed -> erased`` on
    :meth:`erase`; it never moves backwards.

    If ``material`` is a ``bytearray`` and ``shared=True`` the handle works on
    that buffer directly, so zeroizing either side zeroizes both.
    """

    def __init__(self, material: bytes | bytearray, owner: str = "", *,
                 handle_id: str | None = None, shared: bool = False):
        if shared:
            if not isinstance(material, bytearray):
                raise TypeError("shared handles need a bytearray")
            self._buf = np.frombuffer(material, dtype=np.uint8) if len(material) else np.zeros(0, np.uint8)
        else:
            self._buf = np.frombuffer(bytearray(material), dtype=np.uint8) if len(material) else np.zeros(0, np.uint8)
        self._used = np.zeros(len(self._buf), dtype=bool)
        self._nused = 0
        self.cursor = 0
        self.owner = owner
        self.id = handle_id or f"key-{next(_ids)}"
        self.status = KeyStatus.AVAILABLE
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._buf)

    def __repr__(self) -> str:
        return f"KeyHandle(id={self.id!r}, owner={self.owner!r}, len={len(self)}, status={self.status.value})"

    @property
    def remaining(self) -> int:
        return len(self._buf) - self._nused

    @property
    def material(self) -> bytes:
        """Snapshot of the full material (consumed bytes read as zero)."""
        if self.status is not KeyStatus.AVAILABLE:
            raise KeyStateError(f"{self.id} is {self.status.value}")
        return self._buf.tobytes()

    def read(self, offset: int, nbytes: int) -> bytes:
        """Consume ``[offset, offset + nbytes)`` and return it."""
        with self._lock:
            self._check_available()
            if offset < 0 or nbytes < 0:
                raise ValueError("offset and nbytes must be >= 0")
            end = offset + nbytes
            if end > len(self._buf):
                raise KeyExhaustedError(
                    f"{self.id}: need bytes [{offset}, {end}) but handle holds {len(self._buf)}")
            if nbytes == 0:
                return b""
            if self._used[offset:end].any():
                raise KeyReuseError(f"{self.id}: range [{offset}, {end}) overlaps consumed key bytes")
            out = self._buf[offset:end].tobytes()
            self._buf[offset:end] = 0
            self._used[offset:end] = True
            self._nused += nbytes
            if end > self.cursor:
                self.cursor = end
            if self._nused == len(self._buf):
                self.status = KeyStatus.CONSUMED
            return out

    def peek(self, offset: int, nbytes: int) -> bytes:
        """Look at unconsumed bytes without consuming them."""
        with self._lock:
            self._check_available()
            end = offset + nbytes
            if offset < 0 or end > len(self._buf):
                raise KeyExhaustedError(f"{self.id}: bytes [{offset}, {end}) out of range")
            if self._used[offset:end].any():
                raise KeyReuseError(f"{self.id}: range [{offset}, {end}) overlaps consumed key bytes")
            return self._buf[offset:end].tobytes()

    def _row_index(self, offsets: np.ndarray, nbytes: int):
        """Locate rows; returns ``(ok, slice, order, index)``.

        When the in-range rows tile one contiguous run (in some order) the
        run is returned as ``slice`` with ``order`` sorting the rows onto it;
        otherwise ``index`` is a per-byte fancy index.
        """
        offsets = np.asarray(offsets, dtype=np.int64)
        ok = (offsets >= 0) & (offsets + nbytes <= len(self._buf))
        safe = np.where(ok, offsets, 0)
        if len(safe) and ok.all():
            order = np.argsort(safe, kind="stable")
            srt = safe[order]
            if len(srt) == 1 or np.all(np.diff(srt) == nbytes):
                return ok, slice(int(srt[0]), int(srt[0]) + len(srt) * nbytes), order, None
        return ok, None, None, safe[:, None] + np.arange(nbytes, dtype=np.int64)[None, :]

    def gather(self, offsets, nbytes: int) -> tuple[np.ndarray, np.ndarray]:
        """Peek ``nbytes`` at each offset without consuming.

        Returns ``(rows, ok)``; rows that are out of range or touch consumed
        bytes are flagged false in ``ok`` and hold zeros.
        """
        with self._lock:
            self._check_available()
            ok, sl, order, idx = self._row_index(offsets, nbytes)
            n = len(ok)
            if n == 0:
                return np.zeros((0, nbytes), np.uint8), ok
            if sl is not None:
                rows = np.empty((n, nbytes), np.uint8)
                used = np.empty((n, nbytes), bool)
                rows[order] = self._buf[sl].reshape(n, nbytes)
                used[order] = self._used[sl].reshape(n, nbytes)
            else:
                rows = self._buf[idx]
                used = self._used[idx]
            ok = ok & ~used.any(axis=1)
            rows[~ok] = 0
            return rows, ok

    def consume_rows(self, offsets, nbytes: int) -> None:
        """Consume ``nbytes`` at each offset; the ranges must be fresh and disjoint."""
        with self._lock:
            self._check_available()
            offsets = np.asarray(offsets, dtype=np.int64)
            if len(offsets) == 0 or nbytes == 0:
                return
            ok, sl, _, idx = self._row_index(offsets, nbytes)
            if not ok.all():
                raise KeyExhaustedError(f"{self.id}: row outside handle")
            target = sl if sl is not None else idx.reshape(-1)
            used = self._used[target]
            if used.any():
                raise KeyReuseError(f"{self.id}: rows overlap consumed key bytes")
            if sl is None and len(np.unique(idx)) != idx.size:
                raise KeyReuseError(f"{self.id}: rows overlap each other")
            self._buf[target] = 0
            self._used[target] = True
            self._nused += len(offsets) * nbytes
            end = int(offsets.max()) + nbytes
            if end > self.cursor:
                self.cursor = end
            if self._nused == len(self._buf):
                self.status = KeyStatus.CONSUMED

    def take(self, nbytes: int) -> bytes:
        """Consume the next ``nbytes`` after the highest byte read so far."""
        return self.read(self.cursor, nbytes)

    def consume(self) -> None:
        with self._lock:
            if self.status is KeyStatus.AVAILABLE:
                self._buf[:] = 0
                self._used[:] = True
                self._nused = len(self._buf)
                self.status = KeyStatus.CONSUMED

    def erase(self) -> None:
        self.consume()
        with self._lock:
            self._buf[:] = 0
            self.status = KeyStatus.ERASED

    def readable_consumed(self) -> int:
        """Count of consumed positions whose bytes are not zero (should stay 0)."""
        return int(np.count_nonzero(self._buf[self._used]))

    def _check_available(self) -> None:
        if self.status is not KeyStatus.AVAILABLE:
            raise KeyStateError(f"{self.id} is {self.status.value}")

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        state["_buf"] = self._buf.copy()
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()
