from .channel import (HEADER_BYTES, MAC_KEY_BYTES, TAG_BYTES, ChannelConfig, FrameFields,
                      SecureChannel, SnapshotKeys, open_frame, seal_frames)
from .gf128 import gf128_mul, poly_hash_py, tags_batch
from .otp import otp_decrypt, otp_encrypt
from .transport import DatagramPipe, StreamPipe, make_pipe, transfer
from .wegman_carter import AuthKeyPair, wc_tag, wc_verify

__all__ = [
    "HEADER_BYTES", "MAC_KEY_BYTES", "TAG_BYTES", "ChannelConfig", "FrameFields",
    "SecureChannel", "SnapshotKeys", "open_frame", "seal_frames",
    "gf128_mul", "poly_hash_py", "tags_batch",
    "otp_decrypt", "otp_encrypt",
    "DatagramPipe", "StreamPipe", "make_pipe", "transfer",
    "AuthKeyPair", "wc_tag", "wc_verify",
]
