from .auth import AuthPeer, AuthResponse, SessionToken, authenticate_peer
from .protected import EntryInfo, ProtectedArea
from .server import (AccessGrant, DepositRecord, NodeStore, PipelineTrace, TrustedServer,
                     request_mbps)

__all__ = [
    "AuthPeer", "AuthResponse", "SessionToken", "authenticate_peer",
    "EntryInfo", "ProtectedArea",
    "AccessGrant", "DepositRecord", "NodeStore", "PipelineTrace", "TrustedServer", "request_mbps",
]
