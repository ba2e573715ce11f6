from .entropy import EntropySource, OsEntropy, SeededEntropy, make_entropy
from .fabric import KeyFabric, LinkKeyStore, LinkStatus, RelayReceipt, RelayTranscript
from .keys import KeyHandle, KeyStatus
from .topology import FabricTopology, LinkSpec, dump_topology, link_key, load_topology, parse_topology

__all__ = [
    "EntropySource", "OsEntropy", "SeededEntropy", "make_entropy",
    "KeyFabric", "LinkKeyStore", "LinkStatus", "RelayReceipt", "RelayTranscript",
    "KeyHandle", "KeyStatus",
    "FabricTopology", "LinkSpec", "dump_topology", "link_key", "load_topology", "parse_topology",
]
