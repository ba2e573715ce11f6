"""In-process stand-ins for TCP-like and UDP-like links."""

from __future__ import annotations

import numpy as np

from ..errors import FrameError


class StreamPipe:
    """Reliable, ordered byte pipe; frame boundaries are not preserved."""

    def __init__(self):
        self._buf = bytearray()
        self.bytes_carried = 0

    def send(self, frames: list[bytes]) -> None:
        for f in frames:
            self._buf += f
            self.bytes_carried += len(f)

    def receive(self) -> bytes:
        data = bytes(self._buf)
        self._buf.clear()
        return data


class DatagramPipe:
    """Unreliable datagram pipe with bounded reordering and optional loss.

    A datagram is never delivered more than ``reorder - 1`` positions ahead
    of where it was sent.
    """

    def __init__(self, mtu: int, *, reorder: int = 0, loss: float = 0.0, seed: int = 0):
        self.mtu = mtu
        self.reorder = reorder
        self.loss = loss
        self._rng = np.random.default_rng(seed)
        self._queue: list[bytes] = []
        self.bytes_carried = 0

    def send(self, frames: list[bytes]) -> None:
        for f in frames:
            if len(f) > self.mtu:
                raise FrameError(f"datagram of {len(f)} bytes exceeds mtu {self.mtu}")
            self._queue.append(f)
            self.bytes_carried += len(f)

    def receive(self) -> list[bytes]:
        q, self._queue = self._queue, []
        if self.reorder > 1 and len(q) > 1:
            keys = np.arange(len(q)) + self._rng.uniform(0, self.reorder, len(q))
            q = [q[i] for i in np.argsort(keys, kind="stable")]
        if self.loss > 0:
            keep = self._rng.random(len(q)) >= self.loss
            q = [f for f, k in zip(q, keep) if k]
        return q


def transfer(tx, rx, data: bytes, pipe) -> bytes:
    """Send ``data`` from channel ``tx`` to channel ``rx`` through ``pipe``."""
    pipe.send(tx.send(data))
    got = pipe.receive()
    if isinstance(got, (bytes, bytearray)):
        return rx.recv_stream(got)
    return rx.recv(got)


def make_pipe(config, *, reorder: int | None = None, loss: float = 0.0, seed: int = 0):
    if config.transport == "stream":
        return StreamPipe()
    window = config.reorder_window if reorder is None else reorder
    return DatagramPipe(config.mtu, reorder=window, loss=loss, seed=seed)
