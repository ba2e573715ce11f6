"""Fabric topology and its INI config format.

Example::

    [fabric]
    nodes = node1, node2, node3
    default_rate = 1000000      ; bytes/s of simulated key generation per link
    default_initial = 0         ; bytes pre-loaded into each link pool
    auto_generate = yes         ; top pools up on demand (advancing the sim clock)

    [link node1 node2]
    rate = 2500000
    initial = 65536

    [link node2 node3]

Every ``[link a b]`` section declares one undirected QKD link; its keys are
optional and fall back to the ``default_*`` values.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import TopologyError


def link_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class LinkSpec:
    rate: float
    initial: int = 0


@dataclass
class FabricTopology:
    nodes: tuple[str, ...]
    links: dict[tuple[str, str], LinkSpec] = field(default_factory=dict)
    auto_generate: bool = False

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError("duplicate node ids")
        known = set(self.nodes)
        normalized = {}
        for (a, b), spec in self.links.items():
            if a not in known or b not in known:
                raise TopologyError(f"link {a}-{b} references an unknown node")
            if a == b:
                raise TopologyError(f"self-link on {a}")
            if spec.rate < 0 or spec.initial < 0:
                raise TopologyError(f"link {a}-{b}: rate and initial must be >= 0")
            normalized[link_key(a, b)] = spec
        self.links = normalized

    def neighbors(self, node: str) -> list[str]:
        out = [b if a == node else a for (a, b) in self.links if node in (a, b)]
        return sorted(out)

    @classmethod
    def chain(cls, n: int, *, rate: float = 1e6, initial: int = 0,
              auto_generate: bool = False, prefix: str = "node") -> "FabricTopology":
        nodes = tuple(f"{prefix}{i}" for i in range(1, n + 1))
        links = {(nodes[i], nodes[i + 1]): LinkSpec(rate, initial) for i in range(n - 1)}
        return cls(nodes, links, auto_generate)

    @classmethod
    def default_mesh(cls, *, rate: float = 1e6, initial: int = 0, auto_generate: bool = True) -> "FabricTopology":
        """Five trusted nodes: four in a ring, a fifth linked to node1 and node4."""
        nodes = ("node1", "node2", "node3", "node4", "node5")
        pairs = [("node1", "node2"), ("node2", "node3"), ("node3", "node4"),
                 ("node1", "node4"), ("node4", "node5"), ("node1", "node5")]
        return cls(nodes, {p: LinkSpec(rate, initial) for p in pairs}, auto_generate)


def parse_topology(text: str) -> FabricTopology:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise TopologyError(f"unreadable topology: {exc}") from exc
    if not cp.has_section("fabric"):
        raise TopologyError("missing [fabric] section")
    fab = cp["fabric"]
    nodes = tuple(n.strip() for n in fab.get("nodes", "").split(",") if n.strip())
    if not nodes:
        raise TopologyError("[fabric] nodes is empty")
    try:
        default_rate = fab.getfloat("default_rate", 1e6)
        default_initial = fab.getint("default_initial", 0)
        auto = fab.getboolean("auto_generate", False)
        links = {}
        for name in cp.sections():
            if not name.startswith("link"):
                continue
            ends = name.split()[1:]
            if len(ends) != 2:
                raise TopologyError(f"section [{name}] must name exactly two nodes")
            sec = cp[name]
            links[(ends[0], ends[1])] = LinkSpec(
                sec.getfloat("rate", default_rate), sec.getint("initial", default_initial))
    except ValueError as exc:
        raise TopologyError(f"bad value in topology: {exc}") from exc
    return FabricTopology(nodes, links, auto)


def load_topology(path: str | Path) -> FabricTopology:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise TopologyError(f"cannot read topology {path}: {exc}") from exc
    return parse_topology(text)


def dump_topology(topo: FabricTopology) -> str:
    lines = ["[fabric]", f"nodes = {', '.join(topo.nodes)}",
             f"auto_generate = {'yes' if topo.auto_generate else 'no'}", ""]
    for (a, b), spec in sorted(topo.links.items()):
        lines += [f"[link {a} {b}]", f"rate = {spec.rate!r}", f"initial = {spec.initial}", ""]
    return "\n".join(lines)
