"""OTP + Wegman-Carter framed channel.

Wire format, all integers big-endian. ``P`` is the payload length.

Plain header (``header_encryption`` off), overhead 32 bytes::

    0        8    seq            frame counter, strictly increasing per channel
    8        4    payload_len
    12       4    key_offset     low 32 bits of the frame's key-stream offset
    16       P    payload        OTP ciphertext
    16+P     16   tag            Wegman-Carter tag over bytes [0, 16+P)

Encrypted header (``header_encryption`` on), overhead 48 bytes::

    0        8    seq            cleartext copy for routing
    8        8    key_offset     full 64-bit key-stream offset
    16       16   header         the 16-byte plain header above, OTP-encrypted
    32       P    payload        OTP ciphertext
    32+P     16   tag            Wegman-Carter tag over bytes [0, 32+P)

Key stream per frame, starting at ``key_offset``: 16 header-pad bytes (only
with header encryption), ``P`` payload-pad bytes, then the 32-byte one-time
MAC key ``a || b``. With ``encryption`` off (plain benchmark mode) nothing
is encrypted, no key is spent and the tag field is all zeros.
"""

from __future__ import annotations

import hmac
import struct
from dataclasses import dataclass
from typing import Iterable, Protocol

import numpy as np

from ..errors import (ChannelConfigError, FabricError, FrameError, KeyExhaustedError,
                      KeyReuseError, ReorderWindowError, TagFailureError)
from ..keyfabric.keys import KeyHandle
from .gf128 import tags_batch

HEADER = struct.Struct(">QII")
OUTER = struct.Struct(">QQ")
HEADER_BYTES = 16
TAG_BYTES = 16
MAC_KEY_BYTES = 32
_MASK32 = 0xFFFFFFFF

_HDR_DT = np.dtype([("seq", ">u8"), ("len", ">u4"), ("off", ">u4")])
_OUT_DT = np.dtype([("seq", ">u8"), ("off", ">u8")])


@dataclass(frozen=True)
class ChannelConfig:
    transport: str = "stream"
    header_encryption: bool = False
    mtu: int = 1470
    encryption: bool = True
    local: str = ""
    peer: str = ""
    reorder_window: int = 64

    def __post_init__(self):
        if self.transport not in ("stream", "datagram"):
            raise ChannelConfigError(f"unknown transport {self.transport!r}")
        if self.mtu < self.overhead + 1:
            raise ChannelConfigError(f"mtu {self.mtu} leaves no room for payload (overhead {self.overhead})")
        if self.reorder_window < 0:
            raise ChannelConfigError("reorder_window must be >= 0")

    @property
    def header_key_bytes(self) -> int:
        return HEADER_BYTES if self.header_encryption else 0

    @property
    def overhead(self) -> int:
        return HEADER_BYTES + TAG_BYTES + (HEADER_BYTES if self.header_encryption else 0)

    @property
    def max_payload(self) -> int:
        return self.mtu - self.overhead

    @property
    def effective_mtu(self) -> int:
        """Room left for the protected inner packet once the outer header is paid for."""
        return self.mtu - (HEADER_BYTES if self.header_encryption else 0)

    def frame_key_bytes(self, payload_len: int) -> int:
        if not self.encryption:
            return 0
        return self.header_key_bytes + payload_len + MAC_KEY_BYTES

    def frame_count(self, nbytes: int) -> int:
        return -(-nbytes // self.max_payload)

    def key_bytes_for(self, nbytes: int) -> int:
        """Key spent to send ``nbytes`` of payload."""
        if not self.encryption:
            return 0
        return nbytes + self.frame_count(nbytes) * (self.header_key_bytes + MAC_KEY_BYTES)


class KeySource(Protocol):
    def read(self, offset: int, nbytes: int) -> bytes: ...
    def peek(self, offset: int, nbytes: int) -> bytes: ...
    def gather(self, offsets, nbytes: int) -> tuple[np.ndarray, np.ndarray]: ...
    def consume_rows(self, offsets, nbytes: int) -> None: ...


class SnapshotKeys:
    """Read-only view of a key stream. Nothing is consumed; for verification harnesses."""

    def __init__(self, material: bytes):
        self.material = bytes(material)

    def read(self, offset: int, nbytes: int) -> bytes:
        if offset < 0 or offset + nbytes > len(self.material):
            raise KeyExhaustedError(f"bytes [{offset}, {offset + nbytes}) outside snapshot")
        return self.material[offset:offset + nbytes]

    peek = read

    def gather(self, offsets, nbytes: int):
        buf = np.frombuffer(self.material, np.uint8)
        offsets = np.asarray(offsets, dtype=np.int64)
        ok = (offsets >= 0) & (offsets + nbytes <= len(buf))
        idx = np.where(ok, offsets, 0)[:, None] + np.arange(nbytes)[None, :]
        rows = buf[np.clip(idx, 0, max(len(buf) - 1, 0))] if len(buf) else np.zeros(idx.shape, np.uint8)
        rows[~ok] = 0
        return rows, ok

    def consume_rows(self, offsets, nbytes: int) -> None:
        pass


@dataclass(frozen=True)
class FrameFields:
    seq: int
    payload_len: int
    key_offset: int


def seal_frames(cfg: ChannelConfig, data: bytes, first_seq: int, key_offset: int,
                key_region: bytes | None) -> list[bytes]:
    """Fragment ``data`` and build wire frames. ``key_region`` covers exactly the key they spend."""
    n = len(data)
    if n == 0:
        return []
    P = cfg.max_payload
    full, rest = divmod(n, P)
    groups = [(full, P)] if full else []
    if rest:
        groups.append((1, rest))
    src = np.frombuffer(data, dtype=np.uint8)
    keys = np.frombuffer(key_region, dtype=np.uint8) if cfg.encryption else None
    hk = cfg.header_key_bytes
    frames: list[bytes] = []
    pos = kpos = 0
    seq = first_seq
    for rows, plen in groups:
        stride = cfg.frame_key_bytes(plen)
        idx = np.arange(rows, dtype=np.uint64)
        offs = np.uint64(key_offset + kpos) + idx * np.uint64(stride)
        hdr = np.zeros(rows, dtype=_HDR_DT)
        hdr["seq"] = np.uint64(seq) + idx
        hdr["len"] = plen
        hdr["off"] = offs & np.uint64(_MASK32)
        hb = hdr.view(np.uint8).reshape(rows, HEADER_BYTES)
        body = src[pos:pos + rows * plen].reshape(rows, plen)
        if cfg.encryption:
            k = keys[kpos:kpos + rows * stride].reshape(rows, stride)
            if hk:
                hb = hb ^ k[:, :hk]
            body = body ^ k[:, hk:hk + plen]
            mac = k[:, hk + plen:]
        parts = []
        if cfg.header_encryption:
            outer = np.zeros(rows, dtype=_OUT_DT)
            outer["seq"] = hdr["seq"]
            outer["off"] = offs
            parts.append(outer.view(np.uint8).reshape(rows, HEADER_BYTES))
        parts += [hb, body, np.zeros((rows, TAG_BYTES), np.uint8)]
        arr = np.ascontiguousarray(np.concatenate(parts, axis=1))
        flen = arr.shape[1]
        if cfg.encryption:
            starts = np.arange(rows, dtype=np.int64) * flen
            lengths = np.full(rows, flen - TAG_BYTES, dtype=np.int64)
            arr[:, -TAG_BYTES:] = tags_batch(arr.reshape(-1), starts, lengths, np.ascontiguousarray(mac))
        frames.extend(row.tobytes() for row in arr)
        pos += rows * plen
        kpos += rows * stride
        seq += rows
    return frames


def _widen(off32: int, expect: int) -> int:
    """Recover a 64-bit key offset from its low 32 bits, nearest to ``expect``."""
    base = (expect & ~_MASK32) | off32
    candidates = [c for c in (base - (1 << 32), base, base + (1 << 32)) if c >= 0]
    return min(candidates, key=lambda c: abs(c - expect))


def _widen_many(low: np.ndarray, expect: int) -> np.ndarray:
    base = (expect & ~_MASK32) | low
    d = base - expect
    base = np.where(d > (1 << 31), base - (1 << 32), base)
    base = np.where(d < -(1 << 31), base + (1 << 32), base)
    return np.where(base < 0, base + (1 << 32), base)


def _xor(a: bytes, b: bytes) -> bytes:
    return (np.frombuffer(a, np.uint8) ^ np.frombuffer(b, np.uint8)).tobytes()


def open_frame(cfg: ChannelConfig, frame: bytes, keys: KeySource | None,
               expect_offset: int = 0) -> tuple[FrameFields, bytes]:
    """Authenticate and decrypt one frame. Raises on any inconsistency."""
    frame = bytes(frame)
    P = len(frame) - cfg.overhead
    if P < 0 or P > cfg.max_payload:
        raise FrameError(f"frame of {len(frame)} bytes does not fit mtu {cfg.mtu}")
    if cfg.header_encryption:
        outer_seq, off = OUTER.unpack_from(frame)
        hdr_raw = frame[HEADER_BYTES:2 * HEADER_BYTES]
    else:
        hdr_raw = frame[:HEADER_BYTES]
        off = _widen(HEADER.unpack(hdr_raw)[2], expect_offset)
        outer_seq = None
    body_at = cfg.overhead - TAG_BYTES
    body = frame[body_at:body_at + P]
    if cfg.encryption:
        if keys is None:
            raise FrameError("encrypted frame but no key")
        hk = cfg.header_key_bytes
        try:
            region = keys.read(off, cfg.frame_key_bytes(P))
        except (KeyExhaustedError, KeyReuseError) as exc:
            raise FrameError(f"frame key unavailable: {exc}") from exc
        expected = tags_batch(np.frombuffer(frame, np.uint8), np.zeros(1, np.int64),
                              np.array([len(frame) - TAG_BYTES], np.int64),
                              np.frombuffer(region[hk + P:], np.uint8).reshape(1, MAC_KEY_BYTES))
        if not hmac.compare_digest(expected[0].tobytes(), frame[-TAG_BYTES:]):
            raise TagFailureError("frame tag mismatch")
        if hk:
            hdr_raw = _xor(hdr_raw, region[:hk])
        body = _xor(body, region[hk:hk + P]) if P else b""
    seq, plen, off32 = HEADER.unpack(hdr_raw)
    if plen != P:
        raise FrameError(f"header says {plen} payload bytes, frame carries {P}")
    if off32 != off & _MASK32 or (outer_seq is not None and outer_seq != seq):
        raise FrameError("inner and outer headers disagree")
    return FrameFields(seq, P, off), body


class SecureChannel:
    """One endpoint of an OTP channel. A channel pair shares identical key material."""

    def __init__(self, config: ChannelConfig, key: KeyHandle | None = None):
        if config.encryption and key is None:
            raise ChannelConfigError("an encrypting channel needs a key handle")
        self.config = config
        self.key = key
        self.send_seq = 0
        self.send_offset = key.cursor if key is not None else 0
        self.recv_next = 0
        self.recv_offset = self.send_offset
        self.flagged = False
        self.accepted = 0
        self.rejected = 0
        self.key_bytes_sent = 0

    @property
    def window(self) -> int:
        return self.config.reorder_window if self.config.transport == "datagram" else 0

    def send(self, data: bytes) -> list[bytes]:
        cfg = self.config
        if not data:
            return []
        need = cfg.key_bytes_for(len(data))
        region = self.key.read(self.send_offset, need) if cfg.encryption else None
        frames = seal_frames(cfg, bytes(data), self.send_seq, self.send_offset, region)
        self.send_seq += len(frames)
        self.send_offset += need
        self.key_bytes_sent += need
        return frames

    def recv(self, frames: Iterable[bytes]) -> bytes:
        """Reassemble one message. Bad frames are dropped and flag the channel.

        Frames are authenticated in batches of equal length; the outcome is
        the same as calling :func:`open_frame` on each in arrival order.
        """
        frames = [bytes(f) for f in frames]
        opened: list[tuple[int, int, int, bytes] | None] = [None] * len(frames)
        by_len: dict[int, list[int]] = {}
        for i, f in enumerate(frames):
            by_len.setdefault(len(f), []).append(i)
        for flen, idxs in by_len.items():
            for i, r in zip(idxs, self._open_group(flen, [frames[i] for i in idxs])):
                opened[i] = r

        out: list[bytes] = []
        pending: dict[int, bytes] = {}
        failures = 0
        for r in opened:
            if r is None or r[0] < self.recv_next or r[0] in pending:
                failures += 1
                self.rejected += 1
                self.flagged = True
                continue
            seq, plen, off, payload = r
            if seq - self.recv_next > self.window:
                raise ReorderWindowError(
                    f"seq {seq} arrived while waiting for {self.recv_next} (window {self.window})")
            self.accepted += 1
            pending[seq] = payload
            self.recv_offset = max(self.recv_offset, off + self.config.frame_key_bytes(plen))
            while self.recv_next in pending:
                out.append(pending.pop(self.recv_next))
                self.recv_next += 1
        if failures:
            raise TagFailureError(f"{failures} frame(s) failed authentication and were dropped")
        if pending:
            raise FrameError(f"message incomplete: frame {self.recv_next} never arrived")
        return b"".join(out)

    def _open_group(self, flen: int, group: list[bytes]) -> list[tuple[int, int, int, bytes] | None]:
        cfg = self.config
        n = len(group)
        P = flen - cfg.overhead
        if P < 0 or P > cfg.max_payload:
            return [None] * n
        arr = np.frombuffer(b"".join(group), np.uint8).reshape(n, flen)
        hk = cfg.header_key_bytes
        if cfg.header_encryption:
            outer = np.ascontiguousarray(arr[:, :HEADER_BYTES]).view(_OUT_DT).reshape(n)
            raw_off = outer["off"].astype(np.uint64)
            valid = raw_off < np.uint64(1 << 62)
            off = np.where(valid, raw_off, 0).astype(np.int64)
            hdr = arr[:, HEADER_BYTES:2 * HEADER_BYTES]
        else:
            hdr = arr[:, :HEADER_BYTES]
            low = np.ascontiguousarray(hdr).view(_HDR_DT).reshape(n)["off"].astype(np.int64)
            off = _widen_many(low, self.recv_offset)
            valid = np.ones(n, bool)
        body_at = cfg.overhead - TAG_BYTES
        body = arr[:, body_at:body_at + P]
        if cfg.encryption:
            stride = cfg.frame_key_bytes(P)
            keyrows, ok = self.key.gather(off, stride)
            ok &= valid
            tags = tags_batch(arr.reshape(-1), np.arange(n, dtype=np.int64) * flen,
                              np.full(n, flen - TAG_BYTES, np.int64),
                              np.ascontiguousarray(keyrows[:, hk + P:]))
            # whole-row comparison: every byte is examined regardless of where a mismatch sits
            ok &= (tags == arr[:, flen - TAG_BYTES:]).all(axis=1)
            _, first = np.unique(np.where(ok, off, -1), return_index=True)
            keep = np.zeros(n, bool)
            keep[first] = True
            ok &= keep
            self._consume(off[ok], stride)
            if hk:
                hdr = hdr ^ keyrows[:, :hk]
            body = body ^ keyrows[:, hk:hk + P]
        else:
            ok = valid
        fields = np.ascontiguousarray(hdr).view(_HDR_DT).reshape(n)
        seq = fields["seq"].astype(np.uint64)
        ok &= fields["len"].astype(np.int64) == P
        ok &= fields["off"].astype(np.int64) == (off & _MASK32)
        if cfg.header_encryption:
            ok &= seq == outer["seq"].astype(np.uint64)
        body = np.ascontiguousarray(body)
        return [(int(seq[i]), P, int(off[i]), body[i].tobytes()) if ok[i] else None for i in range(n)]

    def _consume(self, offsets: np.ndarray, stride: int) -> None:
        try:
            self.key.consume_rows(offsets, stride)
        except (KeyExhaustedError, KeyReuseError):
            for o in offsets:
                try:
                    self.key.read(int(o), stride)
                except (KeyExhaustedError, KeyReuseError):
                    pass

    def split_stream(self, data: bytes) -> list[bytes]:
        """Cut a byte stream into frames using (decrypted) header lengths."""
        frames, pos, expect = self._split_full(data)
        cfg = self.config
        while pos < len(data):
            if len(data) - pos < cfg.overhead:
                raise FrameError("stream ends inside a frame header")
            if cfg.header_encryption:
                _, off = OUTER.unpack_from(data, pos)
                hdr = data[pos + HEADER_BYTES:pos + 2 * HEADER_BYTES]
                if cfg.encryption:
                    try:
                        hdr = _xor(hdr, self.key.peek(off, HEADER_BYTES))
                    except FabricError as exc:
                        raise FrameError(f"stream desynchronised: {exc}") from exc
            else:
                hdr = data[pos:pos + HEADER_BYTES]
                off = _widen(HEADER.unpack(hdr)[2], expect)
            plen = HEADER.unpack(hdr)[1]
            if plen > cfg.max_payload:
                raise FrameError("stream desynchronised: impossible payload length")
            end = pos + cfg.overhead + plen
            if end > len(data):
                raise FrameError("stream ends inside a frame")
            frames.append(data[pos:end])
            expect = off + cfg.frame_key_bytes(plen)
            pos = end
        return frames

    def _split_full(self, data: bytes) -> tuple[list[bytes], int, int]:
        """Fast path: peel off the leading run of full-size frames in one pass.

        Boundaries are guessed at multiples of the mtu and accepted only if
        every guessed header reports a full payload with consecutive sequence
        numbers. Anything else is left to the frame-by-frame walk.
        """
        cfg = self.config
        flen = cfg.mtu
        n = len(data) // flen
        if n < 2:
            return [], 0, self.recv_offset
        arr = np.frombuffer(data, np.uint8, count=n * flen).reshape(n, flen)
        if cfg.header_encryption:
            off = np.ascontiguousarray(arr[:, :HEADER_BYTES]).view(_OUT_DT).reshape(n)["off"].astype(np.uint64)
            if (off >= np.uint64(1 << 62)).any():
                return [], 0, self.recv_offset
            off = off.astype(np.int64)
            hdr = arr[:, HEADER_BYTES:2 * HEADER_BYTES]
            if cfg.encryption:
                pads, ok = self.key.gather(off, HEADER_BYTES)
                if not ok.all():
                    return [], 0, self.recv_offset
                hdr = hdr ^ pads
        else:
            hdr = arr[:, :HEADER_BYTES]
        fields = np.ascontiguousarray(hdr).view(_HDR_DT).reshape(n)
        seq = fields["seq"].astype(np.int64)
        full = (fields["len"] == cfg.max_payload) & (seq == seq[0] + np.arange(n))
        run = n if full.all() else int(np.argmin(full))
        if run == 0:
            return [], 0, self.recv_offset
        if cfg.header_encryption:
            last = int(off[run - 1])
        else:
            last = int(_widen_many(fields["off"][run - 1:run].astype(np.int64), self.recv_offset)[0])
        frames = [data[i * flen:(i + 1) * flen] for i in range(run)]
        return frames, run * flen, last + cfg.frame_key_bytes(cfg.max_payload)

    def recv_stream(self, data: bytes) -> bytes:
        return self.recv(self.split_stream(data))
