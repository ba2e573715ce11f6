import pytest

from dsgd.genomics import simulate, write_fastq
from dsgd.keyfabric import FabricTopology, KeyFabric, SeededEntropy
from dsgd.trustedserver import TrustedServer


def make_server(seed=7, *, topology=None, **kw):
    ent = SeededEntropy(seed)
    fabric = KeyFabric(topology or FabricTopology.default_mesh(), ent.spawn("fabric"))
    return TrustedServer(fabric, ent.spawn("server"), **kw)


@pytest.fixture(scope="session")
def small_data():
    return simulate(3000, 600, 50, 30, seed=11, num_chroms=2)


@pytest.fixture(scope="session")
def small_fastq(small_data):
    return write_fastq(small_data.reads)


@pytest.fixture
def server():
    return make_server()


@pytest.fixture
def deposited(server, small_data, small_fastq):
    rec = server.deposit(small_fastq, small_data.reference, keep_normal=True)
    return server, rec


# acceptance results, filled by tests/test_acceptance.py and printed at the end of the run
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        line = f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
