"""The twelve acceptance criteria, each at its stated tolerance.

Every test records a pass/fail line that is printed in the terminal summary.
"""

import contextlib
import random
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE, make_server
from dsgd.bench import StageMeasure, run_matrix, throughput, total_throughput
from dsgd.errors import (CapacityError, ChecksumMismatchError, InsufficientKeyError, KeyStateError,
                         MissingComponentError, NoGrantError, TagFailureError, FrameError)
from dsgd.genomics import (FilterPolicy, calls_of, filter_vcf, gzip_decompress, parse_vcf,
                           simulate, simulate_fastq_size, toy_call, write_fastq)
from dsgd.keyfabric import FabricTopology, KeyFabric, KeyHandle, SeededEntropy
from dsgd.keylifecycle import KeyLifecycle, expand_keystream
from dsgd.secretshare import (RandomTape, SecretBlob, reconstruct_shamir23, reconstruct_xor23,
                              share_shamir23, share_xor23)
from dsgd.securechannel import ChannelConfig, SecureChannel, SnapshotKeys, open_frame
from dsgd.trustedserver import ProtectedArea

PAIRS = [("A", "B"), ("A", "C"), ("B", "C")]


class Criterion:
    def __init__(self, n, title):
        self.n, self.title, self.detail = n, title, ""


@contextlib.contextmanager
def criterion(n, title):
    c = Criterion(n, title)
    ACCEPTANCE[n] = (title, False, "did not finish")
    try:
        yield c
    except BaseException as exc:
        ACCEPTANCE[n] = (title, False, c.detail or type(exc).__name__)
        raise
    ACCEPTANCE[n] = (title, True, c.detail)


def random_secrets(count, seed):
    rng = random.Random(seed)
    lengths = [0, 1, 2, 3, 4095, 4096] + [rng.randint(0, 4096) for _ in range(count - 6)]
    return [rng.randbytes(n) for n in lengths]


@pytest.fixture(scope="module")
def big():
    """A ~10 MB synthetic FASTQ deposited with a normal copy kept for comparison."""
    data = simulate_fastq_size(10_000_000, seed=2024)
    fastq = write_fastq(data.reads)
    srv = make_server(seed=99)
    rec = srv.deposit(fastq, data.reference, keep_normal=True)
    return srv, rec, data


def test_01_share_completeness():
    with criterion(1, "share completeness: 1000 secrets x 3 pairs, exact, < 5 s") as c:
        secrets = random_secrets(1000, 1)
        assert any(len(s) % 2 for s in secrets) and any(len(s) % 2 == 0 for s in secrets)
        ent = SeededEntropy(1)
        t0 = time.perf_counter()
        for s in secrets:
            blob = SecretBlob.from_bytes(s)
            shares = share_xor23(blob, RandomTape.draw(ent, blob.half_length))
            for x, y in PAIRS:
                assert reconstruct_xor23(shares[x], shares[y]).data == s
                assert reconstruct_xor23(shares[y], shares[x]).data == s
        secs = time.perf_counter() - t0
        c.detail = f"{secs:.2f} s"
        assert secs < 5


def test_02_perfect_secrecy_bijection():
    with criterion(2, "secrecy bijection: 2^16 tapes -> 2^16 distinct A and B, < 10 s") as c:
        t0 = time.perf_counter()
        for secret in (b"\x00\x00", b"\xff\xff", b"\x5a\xa5", b"\x01\x80", b"\x13\x37"):
            seen_a, seen_b = set(), set()
            for r1 in range(256):
                for r2 in range(256):
                    s = share_xor23(secret, RandomTape(bytes([r1]), bytes([r2])))
                    seen_a.add(s.a.part1 + s.a.part2)
                    seen_b.add(s.b.part1 + s.b.part2)
            assert len(seen_a) == len(seen_b) == 1 << 16
        secs = time.perf_counter() - t0
        c.detail = f"{secs:.2f} s"
        assert secs < 10


def test_03_shamir_equivalence():
    with criterion(3, "XOR and Shamir backends recover identical plaintexts, 1000 secrets"):
        ent = SeededEntropy(3)
        for s in random_secrets(1000, 3):
            blob = SecretBlob.from_bytes(s)
            xs = share_xor23(blob, RandomTape.draw(ent, blob.half_length))
            ss = share_shamir23(blob, ent)
            for x, y in PAIRS:
                a = reconstruct_xor23(xs[x], xs[y]).data
                b = reconstruct_shamir23(ss[x], ss[y]).data
                assert a == b == s


def test_04_mode_equivalence(big):
    with criterion(4, "delivered VCF.gz identical across 4 conditions and holders B/C") as c:
        srv, rec, data = big
        policies = [FilterPolicy(regions=(), mode="region"),
                    FilterPolicy(max_records=len(data.variants) // 3, mode="count"),
                    FilterPolicy(regions=(("chr1", 1, len(data.reference["chr1"]) // 2),), mode="region")]
        counts = []
        for i, policy in enumerate(policies):
            srv.grant("acc4", rec.dataset_id, policy)
            outs = set()
            for storage in ("normal", "share"):
                for transfer in ("plain", "otp"):
                    outs.add(srv.handle_request("acc4", rec.dataset_id, storage=storage, transfer=transfer)[0])
            for holder in ("B", "C"):
                outs.add(srv.handle_request("acc4", rec.dataset_id, holder=holder)[0])
            assert len(outs) == 1
            counts.append(len(parse_vcf(gzip_decompress(outs.pop())).records))
        c.detail = f"{rec.original_size / 1e6:.1f} MB FASTQ, delivered records {counts}"
        assert counts[0] == 0 and counts[1] > 0 and counts[2] > 0


def test_05_relative_overhead(big):
    with criterion(5, "share/OTP total throughput >= 60% of normal/plain") as c:
        srv, rec, _ = big
        report = run_matrix(srv, rec.dataset_id, levels=(0.0,), repeats=3, user="acc5")
        ratio = report.overhead_ratio("extracted 0")
        normal = report.total("normal", "plain", "extracted 0").mbps
        share = report.total("share", "otp", "extracted 0").mbps
        c.detail = f"ratio {ratio:.3f}: {share:.1f} vs {normal:.1f} Mbps"
        print(f"overhead ratio share/otp : normal/plain = {ratio:.3f}")
        assert ratio >= 0.6


def test_06_mtu_accounting():
    with criterion(6, "header encryption costs exactly 16 payload bytes per frame (1470 -> 1454)") as c:
        off = ChannelConfig(mtu=1470, header_encryption=False)
        on = ChannelConfig(mtu=1470, header_encryption=True)
        assert (off.effective_mtu, on.effective_mtu) == (1470, 1454)
        assert off.max_payload - on.max_payload == 16
        key = bytes(200_000)
        sizes = {}
        for cfg in (off, on):
            frames = SecureChannel(cfg, KeyHandle(key)).send(bytes(50_000))
            assert all(len(f) <= 1470 for f in frames)
            sizes[cfg.header_encryption] = len(frames[0]) - cfg.overhead
        assert sizes[False] - sizes[True] == 16
        c.detail = f"payload per frame {sizes[False]} vs {sizes[True]}"


def _sweep(cfg, data, flips, seed):
    """Send ``data``, then feed ``flips`` single-bit-corrupted frames to the receiver."""
    mat = np.random.default_rng(seed).bytes(cfg.key_bytes_for(len(data)))
    frames = SecureChannel(cfg, KeyHandle(mat)).send(data)
    rx = SecureChannel(cfg, KeyHandle(mat))
    assert rx.recv(frames) == data and rx.accepted == len(frames) and not rx.flagged

    rng = np.random.default_rng(seed + 1)
    flen = len(frames[0])
    full = np.frombuffer(b"".join(frames[:-1]), np.uint8).reshape(-1, flen)
    accepted = 0
    batch = 5000
    for start in range(0, flips, batch):
        n = min(batch, flips - start)
        rows = rng.integers(0, len(full), n)
        bits = rng.integers(0, flen * 8, n)
        bad = full[rows].copy()
        bad[np.arange(n), bits // 8] ^= (1 << (bits % 8)).astype(np.uint8)
        victim = SecureChannel(cfg, KeyHandle(mat))
        with pytest.raises(TagFailureError):
            victim.recv([r.tobytes() for r in bad])
        accepted += victim.accepted
        assert victim.rejected == n
    # second route: the single-frame reference path on a sample, last (short) frame included
    snap = SnapshotKeys(mat)
    sample = list(frames[-1:]) + [full[i].tobytes() for i in rng.integers(0, len(full), 500)]
    for f in sample:
        for bit in rng.integers(0, len(f) * 8, 4):
            b = bytearray(f)
            b[bit // 8] ^= 1 << (bit % 8)
            with pytest.raises((TagFailureError, FrameError)):
                open_frame(cfg, bytes(b), snap, expect_offset=0)
    return accepted, len(frames)


def test_07_integrity():
    with criterion(7, "1e5 single-bit corruptions of a 1 MB transfer -> 0 accepted; clean -> 100%") as c:
        data = np.random.default_rng(7).bytes(1_000_000)
        total = 0
        for hdr, flips in ((False, 50_000), (True, 50_000)):
            cfg = ChannelConfig(transport="datagram", header_encryption=hdr, reorder_window=1 << 20)
            accepted, nframes = _sweep(cfg, data, flips, seed=70 + hdr)
            total += accepted
        c.detail = f"{total} of 100000 corrupted frames accepted, {nframes} clean frames accepted"
        assert total == 0


def _hygienic(srv):
    return srv.area.plaintext_entries() == 0 and srv.readable_consumed_key_bytes() == 0 \
        and srv.fabric.readable_consumed_bytes() == 0


def test_08_key_hygiene(small_data, small_fastq):
    with criterion(8, "no plaintext and no readable consumed key after completed or failed requests") as c:
        checks = []
        srv = make_server(area=ProtectedArea(capacity=len(small_fastq) * 4))
        rec = srv.deposit(small_fastq, small_data.reference, keep_normal=True)
        checks.append(_hygienic(srv))
        srv.grant("u", rec.dataset_id, FilterPolicy(max_records=5, mode="count"))
        for storage in ("normal", "share"):
            for transfer in ("plain", "otp"):
                srv.handle_request("u", rec.dataset_id, storage=storage, transfer=transfer)
                checks.append(_hygienic(srv))
        with pytest.raises(NoGrantError):
            srv.handle_request("v", rec.dataset_id)
        checks.append(_hygienic(srv))
        blob = bytearray(srv.stores["node2"].get(f"{rec.dataset_id}.shareB"))
        blob[-3] ^= 1
        srv.stores["node2"].put(f"{rec.dataset_id}.shareB", bytes(blob))
        with pytest.raises(ChecksumMismatchError):
            srv.handle_request("u", rec.dataset_id, holder="B")
        checks.append(_hygienic(srv))
        srv.area.capacity = len(small_fastq) + 100
        with pytest.raises(CapacityError):
            srv.handle_request("u", rec.dataset_id, holder="C")
        checks.append(_hygienic(srv))

        drained = make_server(topology=FabricTopology.chain(5, initial=400_000, auto_generate=False))
        rec = drained.deposit(small_fastq, small_data.reference)
        drained.grant("u", rec.dataset_id, FilterPolicy(max_records=5, mode="count"))
        with pytest.raises(InsufficientKeyError):
            for _ in range(100):
                drained.handle_request("u", rec.dataset_id)
                checks.append(_hygienic(drained))
        checks.append(_hygienic(drained))
        c.detail = f"{len(checks)} inspections"
        assert all(checks)


def test_09_key_lifecycle():
    with criterion(9, "K4 = K1 ^ K3, AES-CTR known answer, K4 unrecoverable after erasure"):
        assert expand_keystream(bytes(16), 48) == oracles.AES128_ZERO_KEY_CTR
        k1 = np.random.default_rng(9).bytes(48 * 64)
        k2 = bytes(16)
        life = KeyLifecycle()
        quad = life.split_key(KeyHandle(k1 + k2), len(k2))
        life.expand_key(quad)
        k3 = life.volatile.get(quad.k3_id)
        assert quad.size == len(k3) == len(k1)
        assert k3[:48] == oracles.AES128_ZERO_KEY_CTR
        k4 = life.derive_otp_key(quad)
        k4_bytes = k4.material
        assert k4_bytes == bytes(a ^ b for a, b in zip(k1, k3))

        life.erase(quad)
        with pytest.raises(KeyStateError):
            k4.material
        with pytest.raises(MissingComponentError):
            life.derive_otp_key(quad)
        with pytest.raises(MissingComponentError):
            life.expand_key(quad)
        for key_id in (quad.k2_id, quad.k3_id, quad.k4_id):
            with pytest.raises(KeyError):
                life.volatile.get(key_id)
        leaked = life.long_term.forensic_dump()
        assert all(k4_bytes not in v and k3[:32] not in v for v in leaked.values())


def test_10_relay_correctness():
    with criterion(10, "5-node chain relay: equal ends, exact per-link use, transcripts need link keys"):
        fab = KeyFabric(FabricTopology.chain(5), SeededEntropy(10))
        n = 4096
        link_keys = []
        for i in range(1, 5):
            fab.generate_link_keys((f"node{i}", f"node{i + 1}"), n)
            link_keys.append(fab.link(f"node{i}", f"node{i + 1}").endpoint_pool(f"node{i}"))
        hs, hd = fab.relay_key("node1", "node5", n)
        key = hs.material
        assert key == hd.material and len(key) == n
        assert [s.consumed for _, s in sorted(fab.links.items())] == [n] * 4
        wire = fab.transcripts[-1].wire
        assert wire == oracles.relay_by_hand(key, link_keys)[0]
        for w, lk in zip(wire, link_keys):
            assert bytes(a ^ b for a, b in zip(w, lk)) == key
            assert w != key
        # consumed link keys are gone from every endpoint, so the transcript alone decodes nothing
        for i in range(1, 5):
            store = fab.link(f"node{i}", f"node{i + 1}")
            assert store.endpoint_pool(f"node{i}") == store.endpoint_pool(f"node{i + 1}") == bytes(n)


def test_11_toy_caller_oracle():
    with criterion(11, "toy caller recovers exactly the planted variants; 0-record policy is empty") as c:
        for seed, chroms in ((11, 1), (12, 3)):
            data = simulate(20_000, 3000, 80, 150, seed, num_chroms=chroms)
            planted = sorted((v.chrom, v.pos, v.ref_base, v.alt_base, v.genotype) for v in data.variants)
            assert all(min(d) >= 2 for d in data.depth.values())
            doc = toy_call(data.reads, data.reference)
            assert calls_of(doc.records) == planted
            empty = filter_vcf(doc, FilterPolicy(regions=(), mode="region"))
            assert empty.records == [] and filter_vcf(doc, FilterPolicy(max_records=0, mode="count")).records == []
        c.detail = f"{len(planted)} planted variants recovered"
        srv = make_server()
        rec = srv.deposit(write_fastq(data.reads), data.reference)
        srv.grant("u", rec.dataset_id, FilterPolicy(max_records=0, mode="count"))
        body = [l for l in gzip_decompress(srv.handle_request("u", rec.dataset_id)[0]).decode().splitlines()
                if not l.startswith("#")]
        assert body == []


def test_12_throughput_equations():
    with criterion(12, "stage and total Mbps match the defining formulas within 0.1%"):
        rng = random.Random(12)
        for _ in range(2000):
            stage = rng.choice(["A", "B1", "B2", "B3", "C"])
            i, o = rng.randint(0, 10**11), rng.randint(0, 10**11)
            secs = rng.uniform(1e-4, 1e4)
            m = StageMeasure(stage, i, o, secs)
            expect = (i if stage == "C" else i + o) * 8 / 1e6 / secs
            assert throughput(stage, m) == pytest.approx(expect, rel=1e-3, abs=1e-12)
            assert total_throughput(i, secs) == pytest.approx(i * 8 / 1e6 / secs, rel=1e-3, abs=1e-12)
        assert throughput("A", StageMeasure("A", 800 * 10**6, 200 * 10**6, 10)) == pytest.approx(800, rel=1e-3)
        assert total_throughput(1000 * 10**6, 20) == pytest.approx(400, rel=1e-3)
