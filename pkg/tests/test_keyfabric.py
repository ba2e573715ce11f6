import pickle
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dsgd.errors import (InsufficientKeyError, KeyExhaustedError, KeyReuseError, KeyStateError,
                         NoRouteError, TopologyError, UnknownLinkError, UnknownNodeError)
from dsgd.keyfabric import (FabricTopology, KeyFabric, KeyHandle, KeyStatus, LinkSpec, OsEntropy,
                            SeededEntropy, dump_topology, load_topology, make_entropy, parse_topology)


class FixedEntropy:
    def __init__(self, data: bytes):
        self.data = data

    def draw(self, n):
        out, self.data = self.data[:n], self.data[n:]
        assert len(out) == n, "test entropy ran out"
        return out


def chain(n=3, **kw):
    return FabricTopology.chain(n, **kw)


# -- entropy ---------------------------------------------------------------


def test_seeded_entropy_reproducible_and_spawn_independent():
    a, b = SeededEntropy(5), SeededEntropy(5)
    assert a.draw(64) == b.draw(64)
    assert a.drawn == 64
    assert a.spawn("x").draw(16) == b.spawn("x").draw(16)
    assert a.spawn("x").draw(16) != a.spawn("y").draw(16)
    c = pickle.loads(pickle.dumps(a))
    assert c.draw(32) == a.draw(32)
    assert len(OsEntropy().draw(10)) == 10
    assert isinstance(make_entropy(None), OsEntropy)
    assert isinstance(make_entropy(3), SeededEntropy)


# -- key handles -----------------------------------------------------------


def test_key_handle_single_use():
    h = KeyHandle(bytes(range(10)), "alice")
    assert h.read(2, 3) == bytes([2, 3, 4])
    with pytest.raises(KeyReuseError):
        h.read(3, 2)
    with pytest.raises(KeyExhaustedError):
        h.read(8, 5)
    assert h.peek(0, 2) == b"\x00\x01"
    assert h.take(2) == bytes([5, 6])  # cursor sits after the highest byte read
    assert h.remaining == 5
    assert h.readable_consumed() == 0
    assert h.material[2:7] == bytes(5)
    h.consume()
    assert h.status is KeyStatus.CONSUMED
    with pytest.raises(KeyStateError):
        h.read(0, 1)
    with pytest.raises(KeyStateError):
        h.material
    h.erase()
    assert h.status is KeyStatus.ERASED
    h.consume()  # never moves backwards
    assert h.status is KeyStatus.ERASED


def test_key_handle_becomes_consumed_when_drained():
    h = KeyHandle(b"abcd")
    h.read(0, 2)
    h.read(2, 2)
    assert h.status is KeyStatus.CONSUMED


def test_shared_handle_zeroizes_backing_buffer():
    buf = bytearray(b"secret!!")
    h = KeyHandle(buf, shared=True)
    h.read(0, 4)
    assert buf[:4] == bytes(4) and buf[4:] == b"et!!"
    h.erase()
    assert buf == bytearray(8)
    with pytest.raises(TypeError):
        KeyHandle(b"bytes", shared=True)


def test_gather_and_consume_rows():
    h = KeyHandle(bytes(range(40)))
    rows, ok = h.gather([10, 0, 20, 35], 10)
    assert ok.tolist() == [True, True, True, False]
    assert rows[0].tobytes() == bytes(range(10, 20)) and rows[3].tobytes() == bytes(10)
    assert h.remaining == 40  # gather does not consume
    h.consume_rows([20, 0], 10)
    assert h.readable_consumed() == 0
    rows, ok = h.gather([0, 10], 10)
    assert ok.tolist() == [False, True]
    with pytest.raises(KeyReuseError):
        h.consume_rows([5], 10)
    with pytest.raises(KeyReuseError):
        h.consume_rows([10, 12], 4)
    with pytest.raises(KeyExhaustedError):
        h.consume_rows([38], 4)


# -- topology --------------------------------------------------------------


TOPO = """
[fabric]
nodes = a, b, c
default_rate = 1000
auto_generate = yes

[link a b]
rate = 1234567
initial = 16

[link b c]
"""


def test_parse_and_dump_topology(tmp_path):
    topo = parse_topology(TOPO)
    assert topo.nodes == ("a", "b", "c")
    assert topo.links[("a", "b")] == LinkSpec(1234567.0, 16)
    assert topo.links[("b", "c")] == LinkSpec(1000.0, 0)
    assert topo.auto_generate
    path = tmp_path / "t.ini"
    path.write_text(dump_topology(topo))
    again = load_topology(path)
    assert again == topo


@pytest.mark.parametrize("text", [
    "", "[fabric]\nnodes =\n", "[fabric]\nnodes = a\n[link a z]\n",
    "[fabric]\nnodes = a, a\n", "[fabric]\nnodes = a, b\n[link a b]\nrate = fast\n",
    "[fabric]\nnodes = a, b\n[link a]\n", "[fabric]\nnodes = a\n[link a a]\n",
])
def test_bad_topologies(text):
    with pytest.raises(TopologyError):
        parse_topology(text)


def test_load_missing_topology(tmp_path):
    with pytest.raises(TopologyError):
        load_topology(tmp_path / "nope.ini")


# -- link keys -------------------------------------------------------------


def test_generate_link_keys():
    fab = KeyFabric(chain(2), SeededEntropy(1))
    store = fab.link("node1", "node2")
    fab.generate_link_keys(("node1", "node2"), 0)
    assert store.pool_length == 0
    fab.generate_link_keys(("node2", "node1"), 1024)
    a, b = store.endpoint_pool("node1"), store.endpoint_pool("node2")
    assert len(a) == len(b) == 1024 and a == b
    with pytest.raises(UnknownLinkError):
        fab.generate_link_keys(("node1", "node3"), 8)
    with pytest.raises(UnknownNodeError):
        store.endpoint_pool("node9")


# -- routing ---------------------------------------------------------------


def test_route_shortest_with_lexical_tiebreak():
    fab = KeyFabric(FabricTopology.default_mesh(), SeededEntropy(1))
    assert fab.route("node1", "node5") == ["node1", "node5"]
    # node2 -> node4: via node1 or node3, both two hops; lexical picks node1
    assert fab.route("node2", "node4") == ["node2", "node1", "node4"]
    assert fab.route("node3", "node5") == ["node3", "node4", "node5"]
    diamond = FabricTopology(("s", "x", "b", "t"), {("s", "x"): LinkSpec(1), ("x", "t"): LinkSpec(1),
                                                    ("s", "b"): LinkSpec(1), ("b", "t"): LinkSpec(1)})
    assert KeyFabric(diamond, SeededEntropy(1)).route("s", "t") == ["s", "b", "t"]


def test_no_route_and_unknown_node():
    topo = FabricTopology(("a", "b", "c"), {("a", "b"): LinkSpec(1)})
    fab = KeyFabric(topo, SeededEntropy(1))
    with pytest.raises(NoRouteError):
        fab.route("a", "c")
    with pytest.raises(UnknownNodeError):
        fab.route("a", "zz")
    with pytest.raises(NoRouteError):
        fab.relay_key("a", "a", 4)


# -- relay -----------------------------------------------------------------


def test_relay_by_hand_three_node_chain():
    k12, k23, key = b"\x10\x20\x30\x40", b"\xa0\xb0\xc0\xd0", b"\x01\x02\x03\x04"
    fab = KeyFabric(chain(3), FixedEntropy(k12 + k23 + key))
    fab.generate_link_keys(("node1", "node2"), 4)
    fab.generate_link_keys(("node2", "node3"), 4)
    hs, hd = fab.relay_key("node1", "node3", 4)
    wire, recovered = oracles.relay_by_hand(key, [k12, k23])
    t = fab.transcripts[-1]
    assert t.route == ["node1", "node2", "node3"]
    assert t.wire == wire == [b"\x11\x22\x33\x44", b"\xa1\xb2\xc3\xd4"]
    assert hs.material == hd.material == recovered == key
    # link keys spent and zeroized at both ends
    for link in (("node1", "node2"), ("node2", "node3")):
        store = fab.link(*link)
        assert store.consumed == 4 and store.available == 0
        assert all(store.endpoint_pool(n) == bytes(4) for n in link)


def test_direct_link_relay():
    fab = KeyFabric(chain(2, initial=64), SeededEntropy(3))
    hs, hd = fab.relay_key("node1", "node2", 40)
    assert hs.material == hd.material and len(hs) == 40
    assert fab.link("node1", "node2").consumed == 40


def test_drained_link_names_the_link():
    topo = FabricTopology(("node1", "node2", "node3"),
                          {("node1", "node2"): LinkSpec(1e6, 100), ("node2", "node3"): LinkSpec(1e6, 10)})
    fab = KeyFabric(topo, SeededEntropy(3))
    with pytest.raises(InsufficientKeyError) as ei:
        fab.relay_key("node1", "node3", 50)
    assert ei.value.link == ("node2", "node3")
    assert "node2-node3" in str(ei.value)
    # nothing was spent on the healthy link
    assert fab.link("node1", "node2").consumed == 0


def test_relay_many_is_all_or_nothing_on_shared_links():
    topo = FabricTopology(("node1", "node2", "node3"),
                          {("node1", "node2"): LinkSpec(1e6, 100), ("node2", "node3"): LinkSpec(1e6, 100)})
    fab = KeyFabric(topo, SeededEntropy(3))
    # each fits alone, together they overdraw node1-node2
    with pytest.raises(InsufficientKeyError):
        fab.relay_many([("node1", "node2", 60), ("node1", "node3", 60)])
    assert fab.link("node1", "node2").consumed == 0 and fab.link("node2", "node3").consumed == 0
    fab.relay_many([("node1", "node2", 40), ("node1", "node3", 60)])
    assert fab.link("node1", "node2").consumed == 100
    assert fab.link("node2", "node3").consumed == 60


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(0, 300)), max_size=8),
       st.integers(0, 1000))
def test_consumption_is_sum_of_routed_requests(requests, seed):
    fab = KeyFabric(chain(5, auto_generate=True), SeededEntropy(seed))
    expect = {pair: 0 for pair in fab.links}
    for a, b, n in requests:
        if a == b:
            continue
        src, dst = f"node{a}", f"node{b}"
        hs, hd = fab.relay_key(src, dst, n)
        assert hs.material == hd.material
        route = fab.route(src, dst)
        for i in range(len(route) - 1):
            expect[tuple(sorted((route[i], route[i + 1])))] += n
    for pair, store in fab.links.items():
        assert store.consumed == expect[pair]
        assert store.endpoint_pool(pair[0]) == store.endpoint_pool(pair[1])
    assert fab.readable_consumed_bytes() == 0


def test_transcript_independent_of_key_without_link_keys():
    # same link keys, different minted keys: each wire value changes exactly by K xor K'
    link = b"\x5a" * 8
    keys = [b"\x00" * 8, b"\xff" * 8]
    wires = []
    for k in keys:
        fab = KeyFabric(chain(2), FixedEntropy(link + k))
        fab.generate_link_keys(("node1", "node2"), 8)
        fab.relay_key("node1", "node2", 8)
        wires.append(fab.transcripts[-1].wire[0])
    assert wires[0] == link and wires[1] == bytes(b ^ 0xFF for b in link)


def test_auto_generate_rate_accounting():
    fab = KeyFabric(chain(3, rate=1000, auto_generate=True), SeededEntropy(1))
    receipt = fab.relay_to_reserve("node1", "node3", 500)
    assert receipt.sim_seconds >= 500 / 1000
    assert all(s.sim_seconds == pytest.approx(0.5) for s in fab.links.values())


# -- supply ----------------------------------------------------------------


def test_supply_zeroizes_fabric_copy():
    fab = KeyFabric(chain(2, initial=100), SeededEntropy(3))
    fab.relay_to_reserve("node1", "node2", 32)
    before = fab.reserve_view("node1", "node2")
    assert fab.reserve_available("node1", "node2") == 32 and before != bytes(32)
    h = fab.supply_key("node1", "app", 20, peer="node2")
    assert h.material == before[:20] and h.owner == "app"
    view = fab.reserve_view("node1", "node2")
    assert view[:20] == bytes(20) and view[20:] == before[20:]
    assert len(fab.supply_key("node1", "app", 0, peer="node2")) == 0
    with pytest.raises(InsufficientKeyError):
        fab.supply_key("node1", "app", 13, peer="node2")
    with pytest.raises(UnknownNodeError):
        fab.supply_key("node9", "app", 1, peer="node2")


def test_status_and_pickle_roundtrip():
    fab = KeyFabric(chain(3, initial=64), SeededEntropy(4))
    fab.relay_key("node1", "node3", 16)
    rows = fab.status()
    assert [(r.link, r.consumed, r.available) for r in rows] == [
        (("node1", "node2"), 16, 48), (("node2", "node3"), 16, 48)]
    clone = pickle.loads(pickle.dumps(fab))
    a = fab.relay_key("node1", "node3", 8)[0].material
    b = clone.relay_key("node1", "node3", 8)[0].material
    assert a == b


def test_concurrent_relays_never_share_key_bytes():
    fab = KeyFabric(chain(4, rate=1e9, auto_generate=True), SeededEntropy(8))
    got = []
    lock = threading.Lock()

    def worker(i):
        for _ in range(20):
            src, dst = ("node1", "node4") if i % 2 else ("node4", "node2")
            hs, hd = fab.relay_key(src, dst, 32)
            assert hs.material == hd.material
            with lock:
                got.append(hs.material)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(got)) == len(got) == 80
    total = sum(s.consumed for s in fab.links.values())
    assert total == 40 * 32 * 3 + 40 * 32 * 2
