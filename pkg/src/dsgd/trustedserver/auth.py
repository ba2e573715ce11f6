"""Challenge-response peer authentication with one-time Wegman-Carter keys.

Both peers hold copies of the same fabric key stream. To answer a challenge
a peer spends the next 32 bytes of its copy on a tag over
``responder || verifier || challenge`` and sends the tag with the stream
offset it used. The verifier spends the same 32 bytes of its own copy to
check it. A replayed answer points at bytes that are already gone, so it
fails even if the challenge were to repeat.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import AuthFailureError, FabricError
from ..keyfabric.keys import KeyHandle
from ..securechannel.wegman_carter import AuthKeyPair, wc_tag, wc_verify

CHALLENGE_BYTES = 16
KEY_BYTES_PER_SESSION = 64  # one 32-byte tag key per direction


@dataclass(frozen=True)
class AuthResponse:
    responder: str
    tag: bytes
    key_offset: int


@dataclass(frozen=True)
class SessionToken:
    initiator: str
    responder: str
    token: bytes

    def __repr__(self) -> str:
        return f"SessionToken({self.initiator!r} <-> {self.responder!r})"


def _message(responder: str, verifier: str, challenge: bytes) -> bytes:
    return b"dsgd-auth|" + responder.encode() + b"|" + verifier.encode() + b"|" + challenge


class AuthPeer:
    def __init__(self, identity: str, key: KeyHandle, entropy):
        self.identity = identity
        self.key = key
        self.entropy = entropy

    def challenge(self) -> bytes:
        return self.entropy.draw(CHALLENGE_BYTES)

    def respond(self, challenge: bytes, verifier: str) -> AuthResponse:
        offset = self.key.cursor
        pair = AuthKeyPair.from_bytes(self.key.take(32))
        return AuthResponse(self.identity, wc_tag(_message(self.identity, verifier, challenge), pair), offset)

    def verify(self, challenge: bytes, response: AuthResponse, expected: str) -> bool:
        if response.responder != expected:
            return False
        try:
            pair = AuthKeyPair.from_bytes(self.key.read(response.key_offset, 32))
        except FabricError:
            return False
        return wc_verify(_message(response.responder, self.identity, challenge), response.tag, pair)


def authenticate_peer(initiator: AuthPeer, responder: AuthPeer) -> SessionToken:
    """Mutual authentication; raises :class:`AuthFailureError` unless both directions verify."""
    c1 = initiator.challenge()
    r1 = responder.respond(c1, initiator.identity)
    if not initiator.verify(c1, r1, responder.identity):
        raise AuthFailureError(f"{responder.identity} failed to authenticate to {initiator.identity}")
    c2 = responder.challenge()
    r2 = initiator.respond(c2, responder.identity)
    if not responder.verify(c2, r2, initiator.identity):
        raise AuthFailureError(f"{initiator.identity} failed to authenticate to {responder.identity}")
    return SessionToken(initiator.identity, responder.identity, initiator.entropy.draw(16))
