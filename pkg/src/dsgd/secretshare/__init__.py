from .gf256 import gf_div, gf_inv, gf_mul
from .shamir import reconstruct_shamir23, share_shamir23
from .sharefile import (DEFAULT_CHUNK, HEADER_SIZE, ShareBundle, chunk_lengths, combine,
                        deal, iter_combined, read_share_file, share_file)
from .xor23 import (LABELS, RandomTape, SecretBlob, SharePair, ShareSet, pad_split,
                    reconstruct_xor23, share_xor23)

__all__ = [
    "gf_div", "gf_inv", "gf_mul",
    "reconstruct_shamir23", "share_shamir23",
    "DEFAULT_CHUNK", "HEADER_SIZE", "ShareBundle", "chunk_lengths", "combine", "deal",
    "iter_combined", "read_share_file", "share_file",
    "LABELS", "RandomTape", "SecretBlob", "SharePair", "ShareSet", "pad_split",
    "reconstruct_xor23", "share_xor23",
]
