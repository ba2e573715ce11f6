"""OTP key generation and erasure with split long-term / volatile storage.

A key K0 delivered by the fabric is split into a large part K1, kept on
long-term media (an SSD: erasure there is unreliable), and a small part K2,
kept only in volatile memory. K2 seeds an AES-128 counter-mode expansion into
K3 with len(K3) == len(K1), and the OTP key is K4 = K1 ^ K3. Erasing the
volatile store alone is enough to make K4 unrecoverable, even if the SSD
still leaks K1.

Expansion details: the AES key is K2 zero-padded or truncated to 16 bytes;
the keystream encrypts a 128-bit big-endian counter starting at 0; the last
block is truncated to fit.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .bitops import xor_bytes
from .errors import KeyStateError, MissingComponentError, RatioError
from .keyfabric.keys import KeyHandle, KeyStatus

K2_RATIO = 64


class _ErasedMarker:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "ERASED"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_ErasedMarker, ())


ERASED = _ErasedMarker()


class LongTermStore:
    """SSD-like store. ``erase`` hides an entry from ``get`` but the media keeps it.

    ``forensic_dump`` models recovering data from flash after a logical delete.
    """

    def __init__(self):
        self.entries: dict[str, bytes] = {}
        self.erased_ids: set[str] = set()
        self._media: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, key_id: str, data: bytes) -> None:
        with self._lock:
            self.entries[key_id] = bytes(data)
            self._media[key_id] = bytes(data)
            self.erased_ids.discard(key_id)

    def get(self, key_id: str):
        with self._lock:
            if key_id in self.erased_ids:
                return ERASED
            return self.entries[key_id]

    def erase(self, key_id: str) -> None:
        with self._lock:
            if key_id in self.entries:
                del self.entries[key_id]
                self.erased_ids.add(key_id)

    def forensic_dump(self) -> dict[str, bytes]:
        with self._lock:
            return dict(self._media)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()


class VolatileStore:
    """DRAM-like store. Erasure zeroizes in place and leaves nothing behind."""

    def __init__(self):
        self.entries: dict[str, bytearray] = {}
        self._lock = threading.Lock()

    def put(self, key_id: str, data: bytes) -> bytearray:
        buf = bytearray(data)
        with self._lock:
            self.entries[key_id] = buf
        return buf

    def get(self, key_id: str) -> bytes:
        with self._lock:
            return bytes(self.entries[key_id])

    def __contains__(self, key_id: str) -> bool:
        return key_id in self.entries

    def erase(self, key_id: str) -> None:
        with self._lock:
            buf = self.entries.pop(key_id, None)
            if buf is not None:
                buf[:] = bytes(len(buf))

    def power_loss(self) -> None:
        with self._lock:
            for buf in self.entries.values():
                buf[:] = bytes(len(buf))
            self.entries.clear()

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()


@dataclass
class KeyQuad:
    k1_id: str
    k2_id: str
    k3_id: str
    k4_id: str
    size: int  # len(K1) == len(K3) == len(K4)
    k2_size: int
    k4_handle: KeyHandle | None = field(default=None, repr=False)


def expand_keystream(seed: bytes, length: int) -> bytes:
    key = (bytes(seed) + bytes(16))[:16]
    enc = Cipher(algorithms.AES(key), modes.CTR(bytes(16))).encryptor()
    return enc.update(bytes(length)) + enc.finalize()


class KeyLifecycle:
    _ids = itertools.count(1)

    def __init__(self, long_term: LongTermStore | None = None, volatile: VolatileStore | None = None):
        self.long_term = long_term or LongTermStore()
        self.volatile = volatile or VolatileStore()

    def split_key(self, k0: KeyHandle, k2_size: int) -> KeyQuad:
        """Step 1: K1 (head) to long-term storage, K2 (last ``k2_size`` bytes) to volatile memory."""
        if k0.status is not KeyStatus.AVAILABLE:
            raise KeyStateError(f"{k0.id} is {k0.status.value}")
        if k2_size < 1 or k2_size * K2_RATIO > len(k0) - k2_size:
            raise RatioError(f"K2 of {k2_size} bytes breaks K2 <= K1/{K2_RATIO} for a {len(k0)}-byte K0")
        material = k0.read(0, len(k0))
        k0.consume()
        n = next(self._ids)
        quad = KeyQuad(f"k1-{n}", f"k2-{n}", f"k3-{n}", f"k4-{n}", len(material) - k2_size, k2_size)
        self.long_term.put(quad.k1_id, material[:quad.size])
        self.volatile.put(quad.k2_id, material[quad.size:])
        return quad

    def expand_key(self, quad: KeyQuad) -> None:
        """Step 2: K3 = AES-128-CTR keystream under K2, len(K3) == len(K1)."""
        try:
            k2 = self.volatile.get(quad.k2_id)
        except KeyError:
            raise MissingComponentError(f"K2 ({quad.k2_id}) is not in volatile memory") from None
        self.volatile.put(quad.k3_id, expand_keystream(k2, quad.size))

    def derive_otp_key(self, quad: KeyQuad, owner: str = "") -> KeyHandle:
        """Step 3: K4 = K1 ^ K3, kept in volatile memory and returned as a single-use handle."""
        try:
            k1 = self.long_term.get(quad.k1_id)
        except KeyError:
            k1 = ERASED
        if k1 is ERASED:
            raise MissingComponentError(f"K1 ({quad.k1_id}) is unavailable")
        try:
            k3 = self.volatile.get(quad.k3_id)
        except KeyError:
            raise MissingComponentError(f"K3 ({quad.k3_id}) is not in volatile memory") from None
        buf = self.volatile.put(quad.k4_id, xor_bytes(k1, k3))
        quad.k4_handle = KeyHandle(buf, owner=owner, handle_id=quad.k4_id, shared=True)
        return quad.k4_handle

    def erase(self, quad: KeyQuad) -> None:
        """Steps 4 and 5. Idempotent."""
        if quad.k4_handle is not None:
            quad.k4_handle.erase()
        for key_id in (quad.k2_id, quad.k3_id, quad.k4_id):
            self.volatile.erase(key_id)
        self.long_term.erase(quad.k1_id)

    def erase_volatile(self, quad: KeyQuad) -> None:
        """Step 4 alone (what a power cut does)."""
        if quad.k4_handle is not None:
            quad.k4_handle.erase()
        for key_id in (quad.k2_id, quad.k3_id, quad.k4_id):
            self.volatile.erase(key_id)
