"""Command-line front end: ``wstack {keygen,analyze,run,verify,adjudicate,bench}``.

Exit codes:

    0  success             5  capacity exhausted
    2  usage error         6  MAC failure
    3  infeasible params   7  validation failure / protocol violation
    4  denial of service   8  evidence rejected
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

from . import analysis
from .fabric import Fabric, FabricParams, load_edge, load_fabric, save_edge, save_fabric, storage_bytes
from .harness import (PROFILES, ChannelConfig, SessionParams, derive_secrets, load_scenario, make_documents,
                      refusal_policy, run_scenario, run_session, wire_stats, FaultReport)
from .oracle import OracleParams
from .protocol import EVIDENCE_REJECTED, Failure, ack_depth, ack_value, adjudicate
from .stack import (CapacityExhausted, apply_extension, empty_stack, family_diff, load_stack, push, save_stack,
                    truncate, validate_extension, verify_full)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_FAILURE = {Failure.DOS: 4, Failure.CAPACITY: 5, Failure.MAC: 6, Failure.VALIDATION: 7}
EXIT_EVIDENCE = 8


class UsageError(Exception):
    pass


def _add_params(p: argparse.ArgumentParser, default_profile: str = "toy") -> None:
    g = p.add_argument_group("parameters")
    g.add_argument("--profile", choices=sorted(PROFILES), default=default_profile)
    g.add_argument("--w", type=int, help="fabric width (power of 2)")
    g.add_argument("--N", type=int, help="chain length")
    g.add_argument("--kappa", type=int, help="oracle cardinality")
    g.add_argument("--phi", type=int, help="checkpoint stride")
    g.add_argument("--L", type=int, help="acknowledgement chain length")
    g.add_argument("--seed", type=int, default=0)


def _params(args: argparse.Namespace) -> SessionParams:
    base = PROFILES[args.profile]
    over = {k: getattr(args, k) for k in ("w", "N", "kappa", "phi", "L") if getattr(args, k) is not None}
    try:
        params = replace(base, seed=args.seed, **over)
        FabricParams(params.w, params.N, min(params.phi, params.N))
        OracleParams(params.w, params.kappa)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if params.phi > params.N:
        params = replace(params, phi=params.N)
    return params


def _print_json(obj, out) -> None:
    print(json.dumps(obj, sort_keys=True), file=out)


# -- keygen -----------------------------------------------------------------

def cmd_keygen(args, out) -> int:
    params = _params(args)
    kappa = params.kappa
    if args.target is not None:
        need = analysis.min_kappa_for_security(params.w, args.target, args.method)
        if need is None:
            print(f"infeasible: no kappa with kappa*log2(w) <= 512 reaches {args.target} bits at w={params.w} "
                  f"({args.method} count); widen the fabric", file=sys.stderr)
            return EXIT_INFEASIBLE
        if args.kappa is None:
            kappa = need
        elif args.kappa < need:
            print(f"infeasible: kappa={args.kappa} gives fewer than {args.target} bits at w={params.w}; "
                  f"need kappa >= {need}", file=sys.stderr)
            return EXIT_INFEASIBLE
    master, _, _ = derive_secrets(params.seed)
    fp = FabricParams(params.w, params.N, params.phi)
    fabric = Fabric.generate(master, fp)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_fabric(fabric, outdir / "alice.wsf")
    save_edge(fabric.edge(), outdir / "alice.wse")
    rep = analysis.security_report(params.w, kappa)
    cap = analysis.capacity(params.w, params.N, kappa)
    summary = {"w": params.w, "N": params.N, "phi": params.phi, "kappa": kappa,
               "security_bits": round(float(rep.exact_bits), 4), "approx_bits": round(rep.approx_bits, 4),
               "hors_entropy_bits": round(float(rep.hors_entropy_bits), 4), "d_max": cap.d_max,
               "d_safe": cap.d_safe, "storage_bytes": storage_bytes(fp),
               "fabric": str(outdir / "alice.wsf"), "edge": str(outdir / "alice.wse")}
    _print_json(summary, out)
    return EXIT_OK


# -- analyze ----------------------------------------------------------------

def cmd_analyze(args, out) -> int:
    if args.fig3:
        rows = analysis.kappa_table(args.target)
        header = ["w", "published", "exact", "approx", "deviation"]
        table = [[r.w, r.published if r.published is not None else "--",
                  r.exact if r.exact is not None else "--", r.approx if r.approx is not None else "--",
                  r.deviation or ""] for r in rows]
    else:
        widths = args.w or [w for w in analysis.TABLE_WIDTHS if analysis.PUBLISHED_KAPPA_256[w]]
        pairs = []
        for w in widths:
            k = args.kappa or analysis.min_kappa_for_security(w, args.target) or analysis.max_kappa(w)
            pairs.append((w, k))
        header = ["w", "kappa", "exact_bits", "approx_bits", "entropy_bits", "d_max", "d_safe"]
        table = [[r.w, r.kappa, f"{r.exact_bits:.4f}", f"{r.approx_bits:.4f}", f"{r.entropy_bits:.4f}",
                  r.d_max, r.d_safe] for r in analysis.analysis_table(pairs, args.N)]
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(table)
        out.write(buf.getvalue())
    else:
        cols = [max(len(str(x)) for x in col) for col in zip(header, *table)]
        for row in [header] + table:
            print("  ".join(str(x).rjust(c) for x, c in zip(row, cols)).rstrip(), file=out)
    return EXIT_OK


# -- run --------------------------------------------------------------------

def _read_documents(path: str) -> list[bytes]:
    docs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            docs.append(bytes.fromhex(line))
    return docs


def _mac_key(spec: Optional[str], seed: int) -> Optional[bytes]:
    if spec is None:
        return None
    if spec == "auto":
        return hashlib.sha256(b"wstack-mac" + seed.to_bytes(8, "big")).digest()
    return bytes.fromhex(spec)


def write_session(res, outdir: Path) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    alice, bob = res.alice, res.bob
    res.transcript.write(outdir / "transcript.jsonl")
    save_stack(alice.stack, outdir / "alice.wss")
    if bob.stack is not None:
        save_stack(bob.stack, outdir / "bob.wss")
    save_edge(alice.edge, outdir / "alice.wse")
    stats = wire_stats(res.transcript)
    record = {
        "protocol": res.protocol,
        "ok": res.ok,
        "failure": None if res.ok else res.failure.reason.value,
        "detail": None if res.ok else res.failure.detail,
        "rounds": res.rounds,
        "L": alice.L,
        "kappa": alice.params.kappa,
        "Q": alice.Q.hex() if alice.Q else None,
        "alice_q": alice.q_last.hex() if alice.q_last else None,
        "bob_q": bob.chain.last_revealed.hex() if bob.chain is not None else None,
        "depth": alice.stack.depth,
        "stacks_equal": res.stacks_equal,
        "ticks": res.ticks,
        "wire": {"alice": asdict(stats.alice), "bob": asdict(stats.bob)},
    }
    if res.protocol == "maws":
        record["outcomes"] = [[p, s] for p, s in bob.outcomes]
    if res.protocol == "rws":
        record["audit_log"] = {str(p): d.hex() for p, d in bob.audit_log.items()}
    (outdir / "session.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return record


def cmd_run(args, out) -> int:
    if args.scenario:
        try:
            sc = load_scenario(args.scenario)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"scenario file: {exc}") from None
        result = run_scenario(sc)
        if isinstance(result, FaultReport):
            _print_json({"scenario": result.scenario, "seed": result.seed, "passed": result.passed,
                         "outcome": result.outcome}, out)
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                result.transcript.write(Path(args.out) / "transcript.jsonl")
            return EXIT_OK if result.passed else EXIT_FAILURE[Failure.VALIDATION]
        res = result
    else:
        params = _params(args)
        params = replace(params, mac_key=_mac_key(args.mac, params.seed), per_element=args.per_element)
        docs = _read_documents(args.docs) if args.docs else make_documents(args.rounds, params.seed)
        try:
            channel = ChannelConfig(args.drop, args.corrupt, args.channel_seed, args.max_retx, args.latency,
                                    args.ber)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        fabric = load_fabric(Path(args.keys) / "alice.wsf") if args.keys else None
        if fabric is not None:
            params = replace(params, w=fabric.w, N=fabric.N, phi=fabric.params.phi)
        refuse = [int(x) for x in args.refuse.split(",")] if args.refuse else []
        if any(not 1 <= r <= len(docs) for r in refuse):
            raise UsageError(f"--refuse rounds must lie in [1, {len(docs)}]")
        approve = refusal_policy(docs, refuse) if refuse else None
        try:
            res = run_session(args.protocol, params, docs, channel, fabric=fabric, approve=approve,
                              workers=args.workers)
        except ValueError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
    record = write_session(res, Path(args.out)) if args.out else None
    stats = wire_stats(res.transcript)
    summary = {"protocol": res.protocol, "ok": res.ok, "rounds": res.rounds, "depth": res.alice.stack.depth,
               "stacks_equal": res.stacks_equal, "alice_bytes": stats.alice.bytes, "bob_bytes": stats.bob.bytes,
               "alice_payload": stats.alice.payload, "bob_payload": stats.bob.payload}
    if not res.ok:
        summary["failure"] = res.failure.reason.value
        summary["detail"] = res.failure.detail
    if record is not None:
        summary["out"] = args.out
    _print_json(summary, out)
    return EXIT_OK if res.ok else EXIT_FAILURE[res.failure.reason]


# -- verify / adjudicate ----------------------------------------------------

def cmd_verify(args, out) -> int:
    edge = load_edge(args.edge)
    stack = load_stack(args.stack)
    kappa = args.kappa or stack.kappa
    if not verify_full(edge, stack.documents, stack.top, kappa):
        _print_json({"valid": False, "reason": f"{EVIDENCE_REJECTED}: stack does not verify against the edge",
                     "depth": stack.depth}, out)
        return EXIT_EVIDENCE
    for p, doc in enumerate(stack.documents):
        _print_json({"position": p, "document": doc.hex(), "status": "confirmed"}, out)
    _print_json({"valid": True, "depth": stack.depth}, out)
    return EXIT_OK


def cmd_adjudicate(args, out) -> int:
    d = Path(args.dir) if args.dir else None
    meta = json.loads((d / "session.json").read_text()) if d else {}
    try:
        edge = load_edge(args.edge or d / "alice.wse")
        Q = bytes.fromhex(args.Q or meta["Q"])
        L = args.L or meta["L"]
        protocol = args.protocol or meta.get("protocol", "bws")
        alice_q = bytes.fromhex(args.alice_q or meta["alice_q"])
        bob_q_hex = args.bob_q if args.bob_q is not None else meta.get("bob_q")
    except (KeyError, TypeError) as exc:
        raise UsageError(f"missing adjudication input: {exc}") from None
    stack_path = args.stack or (d / "bob.wss" if d and (d / "bob.wss").exists() else None)
    stack = load_stack(stack_path) if stack_path else None
    bob_q = bytes.fromhex(bob_q_hex) if bob_q_hex else None
    if args.substack is not None and stack is not None:
        # Bob hands over an older substack together with the acknowledgement that matches it
        if not 0 <= args.substack <= stack.depth:
            raise UsageError(f"--substack must lie in [0, {stack.depth}]")
        stack = truncate(stack, args.substack)
        j = ack_depth(bob_q, Q, L) if bob_q is not None else None
        if j is not None and j >= args.substack:
            bob_q = ack_value(bob_q, j, args.substack)
    alice_stack = load_stack(args.alice_stack) if args.alice_stack else None
    claims = [bytes.fromhex(c) for c in args.claim]
    if protocol == "rws" and not claims and meta.get("audit_log"):
        claims = [bytes.fromhex(h) for h in meta["audit_log"].values()]
    verdict = adjudicate(edge, Q, L, alice_q, stack, protocol, bob_q=bob_q, alice_stack=alice_stack,
                         claims=claims)
    for rec in verdict.records():
        _print_json(rec, out)
    _print_json(verdict.summary(), out)
    return EXIT_OK if verdict.accepted else EXIT_EVIDENCE


# -- bench ------------------------------------------------------------------

def cmd_bench(args, out) -> int:
    params = _params(args)
    master, _, _ = derive_secrets(params.seed)
    t0 = time.perf_counter()
    fabric = Fabric.generate(master, FabricParams(params.w, params.N, params.phi))
    t_gen = time.perf_counter() - t0
    op = OracleParams(params.w, params.kappa)
    docs = make_documents(args.rounds, params.seed)
    s = empty_stack(fabric.edge(), op)
    replica = s
    fabric.reset_hash_count()
    t_push = t_val = 0.0
    pushed = 0
    for doc in docs:
        t0 = time.perf_counter()
        try:
            nxt = push(doc, s, fabric)
        except CapacityExhausted:
            break
        t_push += time.perf_counter() - t0
        tau = family_diff(nxt.top, s.top)
        t0 = time.perf_counter()
        ok = validate_extension(doc, tau, replica)
        replica = apply_extension(replica, doc, tau)
        t_val += time.perf_counter() - t0
        if not ok:
            return EXIT_FAILURE[Failure.VALIDATION]
        s = nxt
        pushed += 1
    elements = pushed * params.kappa
    _print_json({"w": params.w, "N": params.N, "phi": params.phi, "kappa": params.kappa, "pushes": pushed,
                 "generate_s": round(t_gen, 4), "push_us": round(1e6 * t_push / max(pushed, 1), 1),
                 "validate_us": round(1e6 * t_val / max(pushed, 1), 1),
                 "recompute_hashes_per_element": round(fabric.hash_count / max(elements, 1), 3)}, out)
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wstack", description="Winternitz stack signatures and protocols")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a fabric and its public edge")
    _add_params(p, "paper")
    p.add_argument("--target", type=float, help="required security bits; picks or checks kappa")
    p.add_argument("--method", choices=("exact", "approx"), default="exact",
                   help="multiset count used for --target (approx = Stirling form)")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("analyze", help="security and capacity table")
    p.add_argument("--fig3", action="store_true", help="minimal kappa per width, against the published levels")
    p.add_argument("--w", type=int, action="append", help="fabric width (repeatable)")
    p.add_argument("--kappa", type=int)
    p.add_argument("--N", type=int, default=8192)
    p.add_argument("--target", type=float, default=256)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="run a protocol session over the simulated channel")
    _add_params(p)
    p.add_argument("--protocol", choices=("bws", "maws", "rws"), default="bws")
    p.add_argument("--rounds", type=int, default=10, help="number of random documents to sign")
    p.add_argument("--docs", help="file with one hex document per line")
    p.add_argument("--drop", type=float, default=0.0)
    p.add_argument("--corrupt", type=float, default=0.0)
    p.add_argument("--ber", type=float, default=0.0, help="per-bit error rate")
    p.add_argument("--max-retx", type=int, default=16)
    p.add_argument("--latency", type=int, default=1)
    p.add_argument("--channel-seed", type=int, default=0)
    p.add_argument("--mac", help="MAC key as hex, or 'auto' to derive one from --seed")
    p.add_argument("--per-element", action="store_true", help="BWS: stream tau one entry at a time")
    p.add_argument("--refuse", help="MAWS: comma-separated rounds Bob refuses to countersign")
    p.add_argument("--workers", type=int, default=1, choices=(1, 2))
    p.add_argument("--keys", help="directory holding alice.wsf from keygen")
    p.add_argument("--scenario", help="key=value scenario file (overrides the other options)")
    p.add_argument("--out", help="directory for transcript, stacks and session.json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="check a stack file against an edge file")
    p.add_argument("--edge", required=True)
    p.add_argument("--stack", required=True)
    p.add_argument("--kappa", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("adjudicate", help="settle a dispute from session evidence")
    p.add_argument("--dir", help="session directory written by 'run --out'")
    p.add_argument("--edge")
    p.add_argument("--stack", help="verifier's stack file")
    p.add_argument("--alice-stack", help="alternative stack offered by alice")
    p.add_argument("--Q")
    p.add_argument("--L", type=int)
    p.add_argument("--alice-q")
    p.add_argument("--bob-q")
    p.add_argument("--protocol", choices=("bws", "maws", "rws"))
    p.add_argument("--claim", action="append", default=[], help="RWS: disputed document (hex, repeatable)")
    p.add_argument("--substack", type=int, help="submit the verifier stack truncated to this depth")
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("bench", help="time generation, push and validation")
    _add_params(p)
    p.add_argument("--rounds", type=int, default=20)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"wstack {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
