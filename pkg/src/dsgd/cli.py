"""Command-line driver.

State (the key fabric, the trusted server, node storage) lives in a pickle
under ``--state-dir`` between invocations. Settings come from an INI file
(``--config``, section ``[dsgd]``) and are overridden by flags.

Exit codes: 0 success, 1 domain error (``error[<module>.<kind>]: ...`` on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import pickle
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

from .bench import run_matrix, run_otp_transport
from .errors import DsgdError
from .genomics import (CallerParams, FilterPolicy, Reference, simulate, write_fastq)
from .keyfabric import FabricTopology, KeyFabric, load_topology, make_entropy
from .keylifecycle import K2_RATIO, KeyLifecycle
from .securechannel import ChannelConfig
from .trustedserver import ProtectedArea, TrustedServer, request_mbps

STATE_FILE = "state.pkl"

CONFIG_KEYS = """\
[dsgd]
topology = <path to topology INI>      ; default: built-in five-node mesh
seed = <int>                            ; omit for OS entropy
protected_capacity = 1073741824         ; bytes
protected_ttl = 86400                   ; seconds
min_depth = 2
alt_fraction = 0.5
hom_fraction = 0.8
mtu = 1470
transport = stream                      ; stream | datagram
header_encryption = no
"""


class UsageError(Exception):
    pass


@dataclass
class AppConfig:
    topology: Path | None = None
    seed: int | None = None
    protected_capacity: int = 1 << 30
    protected_ttl: float = 24 * 3600.0
    caller: CallerParams = CallerParams()
    mtu: int = 1470
    transport: str = "stream"
    header_encryption: bool = False

    @classmethod
    def load(cls, path: str | None, args: argparse.Namespace) -> "AppConfig":
        cfg = cls()
        if path:
            cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
            if not cp.read(path):
                raise UsageError(f"config file {path} not found")
            sec = cp["dsgd"] if cp.has_section("dsgd") else {}
            try:
                if "topology" in sec:
                    cfg.topology = (Path(path).parent / sec["topology"]).resolve()
                if "seed" in sec:
                    cfg.seed = int(sec["seed"])
                cfg.protected_capacity = int(sec.get("protected_capacity", cfg.protected_capacity))
                cfg.protected_ttl = float(sec.get("protected_ttl", cfg.protected_ttl))
                cfg.caller = CallerParams(int(sec.get("min_depth", 2)), float(sec.get("alt_fraction", 0.5)),
                                          float(sec.get("hom_fraction", 0.8)))
                cfg.mtu = int(sec.get("mtu", cfg.mtu))
                cfg.transport = sec.get("transport", cfg.transport)
                if "header_encryption" in sec:
                    cfg.header_encryption = cp.getboolean("dsgd", "header_encryption")
            except ValueError as exc:
                raise UsageError(f"bad value in {path}: {exc}") from None
        # flags win over the file
        if getattr(args, "topology", None):
            cfg.topology = Path(args.topology)
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "mtu", None):
            cfg.mtu = args.mtu
        if getattr(args, "transport", None):
            cfg.transport = args.transport
        if getattr(args, "header_encryption", None):
            cfg.header_encryption = True
        if cfg.topology is not None and not cfg.topology.is_file():
            raise UsageError(f"topology file {cfg.topology} not found")
        return cfg

    def channel(self) -> ChannelConfig:
        return ChannelConfig(transport=self.transport, header_encryption=self.header_encryption, mtu=self.mtu)


# -- state ---------------------------------------------------------------------


def _state_path(args) -> Path:
    return Path(args.state_dir) / STATE_FILE


def load_state(args, *, required: bool = True) -> TrustedServer | None:
    path = _state_path(args)
    if not path.exists():
        if required:
            raise UsageError(f"no state in {args.state_dir}; run `keyfab init` or `deposit` first")
        return None
    with open(path, "rb") as fh:
        return pickle.load(fh)


def save_state(args, server: TrustedServer) -> None:
    path = _state_path(args)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        pickle.dump(server, fh)
    tmp.replace(path)


def build_server(cfg: AppConfig, *, owner: str = "node1", holder_b: str = "node2",
                 holder_c: str = "node3") -> TrustedServer:
    topo = load_topology(cfg.topology) if cfg.topology else FabricTopology.default_mesh()
    ent = make_entropy(cfg.seed)
    fabric = KeyFabric(topo, ent.spawn("fabric"))
    area = ProtectedArea(cfg.protected_capacity, cfg.protected_ttl)
    return TrustedServer(fabric, ent.spawn("server"), node=owner, holders={"B": holder_b, "C": holder_c},
                         area=area, caller=cfg.caller, channel=cfg.channel())


# -- commands ------------------------------------------------------------------


def cmd_keyfab(args, cfg: AppConfig) -> int:
    if args.keyfab_cmd == "init":
        if _state_path(args).exists() and not args.force:
            raise UsageError(f"state already exists in {args.state_dir} (use --force to replace)")
        server = build_server(cfg, owner=args.owner, holder_b=args.holder_b, holder_c=args.holder_c)
        save_state(args, server)
        print(f"initialised fabric with {len(server.fabric.nodes)} nodes and "
              f"{len(server.fabric.links)} links in {args.state_dir}")
        print(f"owner {server.node}, holder B {server.holders['B']}, holder C {server.holders['C']}")
        return 0
    server = load_state(args)
    fab = server.fabric
    rows = [["link", "rate_Bps", "generated", "consumed", "available", "sim_seconds"]]
    for s in fab.status():
        rows.append([f"{s.link[0]}-{s.link[1]}", f"{s.rate:g}", str(s.pool_length), str(s.consumed),
                     str(s.available), f"{s.sim_seconds:.3f}"])
    if args.format == "tsv":
        print("\n".join("\t".join(r) for r in rows))
    else:
        from .bench import render_table
        print(render_table(rows[0], rows[1:]), end="")
        print(f"auto_generate: {fab.auto_generate}; readable consumed key bytes: {fab.readable_consumed_bytes()}")
    return 0


def cmd_simulate(args, cfg: AppConfig) -> int:
    seed = args.seed if args.seed is not None else (cfg.seed or 0)
    data = simulate(args.reference_length, args.num_reads, args.read_length, args.num_variants, seed,
                    num_chroms=args.num_chroms)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reads.fastq").write_bytes(write_fastq(data.reads))
    (out / "reference.fa").write_bytes(data.reference.to_fasta())
    with open(out / "truth.tsv", "w") as fh:
        fh.write("chrom\tpos\tref\talt\tgenotype\n")
        for v in data.variants:
            fh.write(f"{v.chrom}\t{v.pos}\t{v.ref_base}\t{v.alt_base}\t{v.genotype}\n")
    print(f"wrote {len(data.reads)} reads, {sum(map(len, data.reference.values()))} reference bases, "
          f"{len(data.variants)} planted variants to {out}")
    return 0


def cmd_deposit(args, cfg: AppConfig) -> int:
    server = load_state(args, required=False)
    if server is None:
        server = build_server(cfg, owner=args.owner or "node1")
    elif args.owner and args.owner != server.node:
        raise UsageError(f"this state's owner node is {server.node}, not {args.owner}")
    fastq = Path(args.fastq).read_bytes()
    reference = Reference.load(args.reference)
    rec = server.deposit(fastq, reference, dataset_id=args.dataset_id, keep_normal=args.keep_normal)
    save_state(args, server)
    print(f"deposited {rec.dataset_id}: {rec.original_size} bytes; "
          + ", ".join(f"share {lab} -> {node}" for lab, node in sorted(rec.placements.items())))
    return 0


def _policy(args) -> FilterPolicy:
    if args.regions is None and args.max_records is None:
        raise UsageError("grant needs --regions and/or --max-records")
    try:
        regions = FilterPolicy.parse_regions(args.regions) if args.regions is not None else ()
        if args.regions is not None and args.max_records is not None:
            return FilterPolicy(regions, args.max_records, "both")
        if args.regions is not None:
            return FilterPolicy(regions, None, "region")
        return FilterPolicy((), args.max_records, "count")
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_grant(args, cfg: AppConfig) -> int:
    server = load_state(args)
    policy = _policy(args)
    expiry = server.clock() + args.ttl if args.ttl else None
    g = server.grant(args.user, args.dataset, policy, node=args.node, expiry=expiry)
    save_state(args, server)
    print(f"granted {g.user} ({server.users[g.user]}) on {g.dataset_id}: {policy.describe()}")
    return 0


def cmd_request(args, cfg: AppConfig) -> int:
    server = load_state(args)
    try:
        data, trace = server.handle_request(args.user, args.dataset, storage=args.storage,
                                            transfer=args.mode, holder=args.holder)
    finally:
        # keys spent and grants touched must persist even when the request fails
        save_state(args, server)
    out = Path(args.out) if args.out else Path(args.state_dir) / "delivered" / f"{args.user}-{args.dataset}.vcf.gz"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(data)
    rates = request_mbps(trace)
    print(f"delivered {len(data)} bytes ({trace.records_delivered} of {trace.records_called} records) to {out}")
    print(f"storage={trace.storage} transfer={trace.transfer} holder={trace.holder or '-'}")
    for s in trace.stages:
        print(f"  {s.stage:<5} in={s.input_bytes:>10} out={s.output_bytes:>10} "
              f"{s.seconds:9.4f}s {rates[s.stage]:10.2f} Mbps")
    print(f"  total fastq={trace.fastq_bytes:>8} {trace.total_seconds:9.4f}s {rates['total']:10.2f} Mbps")
    print(f"sha256 {hashlib.sha256(data).hexdigest()}")
    return 0


def cmd_keylifecycle(args, cfg: AppConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    ent = make_entropy(seed)
    fabric = KeyFabric(FabricTopology.chain(2, auto_generate=True), ent.spawn("fabric"))
    a, b = fabric.nodes
    k0, peer_k0 = fabric.relay_key(a, b, args.k0_bytes)
    life = KeyLifecycle()
    k2 = args.k2_bytes or max(1, args.k0_bytes // (K2_RATIO + 1))
    quad = life.split_key(k0, k2)
    print(f"step 1: K0 {args.k0_bytes} bytes -> K1 {quad.size} bytes (long-term), K2 {quad.k2_size} bytes (volatile)")
    life.expand_key(quad)
    print(f"step 2: K3 expanded to {quad.size} bytes")
    k4 = life.derive_otp_key(quad, owner=a)
    print(f"step 3: K4 = K1 xor K3, {len(k4)} bytes")
    peer_k0.erase()
    life.erase(quad)
    try:
        life.derive_otp_key(quad)
        recovered = True
    except DsgdError:
        recovered = False
    print(f"steps 4-5: erased; K4 recoverable afterwards: {'yes' if recovered else 'no'}")
    return 1 if recovered else 0


def cmd_bench(args, cfg: AppConfig) -> int:
    if args.bench_cmd == "otp":
        transports = (args.transport,) if args.transport else ("stream", "datagram")
        modes = (args.hdr == "on",) if args.hdr else (False, True)
        report = run_otp_transport(int(args.payload_mb * 1e6), runs=args.runs,
                                   seed=args.seed if args.seed is not None else (cfg.seed or 0),
                                   base=replace(cfg.channel(), header_encryption=False),
                                   transports=transports, header_modes=modes)
    else:
        server = load_state(args)
        try:
            levels = [float(x) for x in args.levels.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad --levels {args.levels!r}") from None
        try:
            report = run_matrix(server, args.dataset, levels, repeats=args.repeats, user=args.user)
        finally:
            save_state(args, server)
    print(report.to_tsv() if args.format == "tsv" else report.to_text(), end="")
    return 0


def _demo_once(seed: int, size: int, workdir: Path) -> tuple[bytes, str]:
    cfg = AppConfig(seed=seed)
    server = build_server(cfg)
    data = simulate(max(200, size // 70), max(4, size // 230), 100, max(1, size // 7000), seed)
    rec = server.deposit(write_fastq(data.reads), data.reference)
    server.grant("demo-user", rec.dataset_id, FilterPolicy(mode="count", max_records=len(data.variants) // 2))
    out, trace = server.handle_request("demo-user", rec.dataset_id, storage="share", transfer="otp")
    path = workdir / "state.pkl"
    with open(path, "wb") as fh:
        pickle.dump(server, fh)
    summary = f"{rec.dataset_id}: {trace.records_delivered}/{trace.records_called} records, {len(out)} bytes"
    return out, summary


def cmd_demo(args, cfg: AppConfig) -> int:
    seed = args.seed if args.seed is not None else (cfg.seed if cfg.seed is not None else 42)
    size = int(args.size_mb * 1e6)
    outs = []
    for i in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            out, summary = _demo_once(seed, size, Path(tmp))
        outs.append(out)
        print(f"run {i + 1}: {summary}, sha256 {hashlib.sha256(out).hexdigest()}")
    same = outs[0] == outs[1]
    print("outputs identical" if same else "outputs DIFFER")
    return 0 if same else 1


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dsgd", description="Distributed secure genome data toolkit.",
                                epilog="Config file keys:\n" + CONFIG_KEYS,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--state-dir", default=".dsgd", help="where fabric and server state persist (default .dsgd)")
    p.add_argument("--config", help="INI config file with a [dsgd] section; flags override it")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    kf = sub.add_parser("keyfab", help="set up or inspect the key fabric")
    kfs = kf.add_subparsers(dest="keyfab_cmd", metavar="ACTION")
    kfs.required = True
    init = kfs.add_parser("init", help="create fabric and server state")
    init.add_argument("--topology", help="topology INI file (default: built-in five-node mesh)")
    init.add_argument("--seed", type=int, help="seed for every random draw")
    init.add_argument("--owner", default="node1", help="data owner / trusted server node")
    init.add_argument("--holder-b", default="node2", help="node holding share B")
    init.add_argument("--holder-c", default="node3", help="node holding share C")
    init.add_argument("--transport", choices=["stream", "datagram"], help="channel transport")
    init.add_argument("--header-encryption", action="store_true", default=None,
                      help="encrypt frame headers (16 bytes less payload per frame)")
    init.add_argument("--mtu", type=int, help="channel mtu in bytes (default 1470)")
    init.add_argument("--force", action="store_true", help="replace existing state")
    st = kfs.add_parser("status", help="per-link key counters")
    st.add_argument("--format", choices=["text", "tsv"], default="text")

    sim_help = "write a synthetic reference, reads and truth set"
    gen = sub.add_parser("genomics", help="synthetic data (same as the top-level simulate)")
    gens = gen.add_subparsers(dest="genomics_cmd", metavar="ACTION")
    gens.required = True
    for sim in (sub.add_parser("simulate", help=sim_help), gens.add_parser("simulate", help=sim_help)):
        sim.add_argument("--reference-length", type=int, required=True)
        sim.add_argument("--num-reads", type=int, required=True)
        sim.add_argument("--read-length", type=int, default=100)
        sim.add_argument("--num-variants", type=int, required=True)
        sim.add_argument("--num-chroms", type=int, default=1)
        sim.add_argument("--seed", type=int)
        sim.add_argument("--out-dir", default="sim", help="output directory (default ./sim)")

    dep = sub.add_parser("deposit", help="share a FASTQ and distribute B and C")
    dep.add_argument("fastq")
    dep.add_argument("--owner", help="owner node (must match existing state)")
    dep.add_argument("--reference", required=True, help="reference FASTA used for calling")
    dep.add_argument("--dataset-id")
    dep.add_argument("--keep-normal", action="store_true",
                     help="also keep the plaintext at the owner (needed for normal-storage benchmarks)")
    dep.add_argument("--seed", type=int, help="seed used if this creates fresh state")

    gr = sub.add_parser("grant", help="give a user filtered access to a dataset")
    gr.add_argument("user")
    gr.add_argument("dataset")
    gr.add_argument("--regions", help="chrom:start-end[,chrom:start-end...]; empty string means none")
    gr.add_argument("--max-records", type=int)
    gr.add_argument("--node", help="fabric node the user sits at (default: last node)")
    gr.add_argument("--ttl", type=float, help="grant lifetime in seconds (default: no expiry)")

    rq = sub.add_parser("request", help="run the analysis for a user and deliver the filtered VCF.gz")
    rq.add_argument("user")
    rq.add_argument("dataset")
    rq.add_argument("--mode", choices=["plain", "otp"], default="otp", help="transfer condition")
    rq.add_argument("--storage", choices=["normal", "share"], default="share")
    rq.add_argument("--holder", choices=["B", "C"], help="share holder to fetch from (default B, else C)")
    rq.add_argument("--out", help="where to write the delivered VCF.gz")

    kl = sub.add_parser("keylifecycle", help="split / expand / derive / erase walk-through")
    kls = kl.add_subparsers(dest="kl_cmd", metavar="ACTION")
    kls.required = True
    demo = kls.add_parser("demo")
    demo.add_argument("--k0-bytes", type=int, default=4096)
    demo.add_argument("--k2-bytes", type=int, help=f"default K0/{K2_RATIO + 1}")
    demo.add_argument("--seed", type=int)

    be = sub.add_parser("bench", help="throughput benchmarks")
    bes = be.add_subparsers(dest="bench_cmd", metavar="ACTION")
    bes.required = True
    run = bes.add_parser("run", help="storage x transfer matrix on a deposited dataset")
    run.add_argument("--dataset", required=True)
    run.add_argument("--levels", default="0,0.01,0.5,1.0", help="extraction fractions of the call set")
    run.add_argument("--repeats", type=int, default=3)
    run.add_argument("--user", default="bench")
    run.add_argument("--format", choices=["text", "tsv"], default="text")
    otp = bes.add_parser("otp", help="OTP transport matrix")
    otp.add_argument("--payload-mb", type=float, default=10.0)
    otp.add_argument("--runs", type=int, default=5)
    otp.add_argument("--seed", type=int)
    otp.add_argument("--transport", choices=["stream", "datagram"], help="only this transport (default both)")
    otp.add_argument("--header-encryption", choices=["on", "off"], dest="hdr",
                     help="only this header mode (default both)")
    otp.add_argument("--mtu", type=int, help="channel mtu in bytes (default 1470)")
    otp.add_argument("--format", choices=["text", "tsv"], default="text")

    dm = sub.add_parser("demo", help="deposit -> grant -> request twice and compare outputs")
    dm.add_argument("--seed", type=int)
    dm.add_argument("--size-mb", type=float, default=1.0)
    return p


COMMANDS = {"keyfab": cmd_keyfab, "simulate": cmd_simulate, "genomics": cmd_simulate, "deposit": cmd_deposit, "grant": cmd_grant,
            "request": cmd_request, "keylifecycle": cmd_keylifecycle, "bench": cmd_bench, "demo": cmd_demo}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = AppConfig.load(args.config, args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DsgdError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
