"""Exception hierarchy.

Every error carries a module-qualified ``code`` (``"keyfabric.no-route"``) so the
CLI can print a stable identifier next to the message.
"""

from __future__ import annotations


class DsgdError(Exception):
    module = "dsgd"
    kind = "error"

    @property
    def code(self) -> str:
        return f"{self.module}.{self.kind}"


# secretshare
class ShareError(DsgdError):
    module = "secretshare"
    kind = "invalid-share"


class TapeMismatchError(ShareError):
    kind = "tape-mismatch"


class DuplicateLabelError(ShareError):
    kind = "duplicate-label"


class ShareLengthError(ShareError):
    kind = "length-mismatch"


class ShareFormatError(ShareError):
    kind = "bad-share-file"


class EntropyExhaustedError(ShareError):
    kind = "entropy-exhausted"


# keyfabric
class FabricError(DsgdError):
    module = "keyfabric"


class UnknownLinkError(FabricError):
    kind = "unknown-link"


class UnknownNodeError(FabricError):
    kind = "unknown-node"


class NoRouteError(FabricError):
    kind = "no-route"


class InsufficientKeyError(FabricError):
    kind = "insufficient-key-material"

    def __init__(self, message: str, link: tuple[str, str] | None = None):
        super().__init__(message)
        self.link = link


class TopologyError(FabricError):
    kind = "bad-topology"


class KeyStateError(FabricError):
    """A handle was used outside the ``available`` state."""

    kind = "key-not-available"


class KeyReuseError(FabricError):
    kind = "key-reuse"


class KeyExhaustedError(FabricError):
    kind = "key-exhausted"


# keylifecycle
class LifecycleError(DsgdError):
    module = "keylifecycle"


class RatioError(LifecycleError):
    kind = "ratio-violation"


class MissingComponentError(LifecycleError):
    kind = "missing-component"


# securechannel
class ChannelError(DsgdError):
    module = "securechannel"


class TagFailureError(ChannelError):
    kind = "tag-failure"


class FrameError(ChannelError):
    kind = "bad-frame"


class ReorderWindowError(ChannelError):
    kind = "out-of-window"


class ChannelConfigError(ChannelError):
    kind = "bad-config"


# genomics
class GenomicsError(DsgdError):
    module = "genomics"


class FastqParseError(GenomicsError):
    kind = "fastq-parse"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class VcfParseError(GenomicsError):
    kind = "vcf-parse"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ReferenceBoundsError(GenomicsError):
    kind = "reference"


class GzipError(GenomicsError):
    kind = "corrupt-gzip"


# trustedserver
class ServerError(DsgdError):
    module = "trustedserver"


class AuthFailureError(ServerError):
    kind = "auth-failure"


class NoGrantError(ServerError):
    kind = "no-grant"


class ChecksumMismatchError(ServerError):
    kind = "checksum-mismatch"


class HolderUnreachableError(ServerError):
    kind = "holder-unreachable"


class CapacityError(ServerError):
    kind = "protected-area-full"


class UnknownDatasetError(ServerError):
    kind = "unknown-dataset"


# bench
class BenchError(DsgdError):
    module = "bench"
    kind = "bad-measure"
