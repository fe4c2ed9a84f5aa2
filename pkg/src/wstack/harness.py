"""Deterministic simulated channel and session driver.

Time is a virtual tick counter. Every frame is delivered ``latency_ticks``
after it is sent unless the channel drops it; a corrupted frame has one
random bit flipped. Key setup (INVITE, EDGE, BOBKEY) is delivered out of
band, as the protocols authenticate those values outside the channel.

Given the session seed, the channel seed and the documents, the transcript
is reproduced byte for byte.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from .analysis import capacity
from .fabric import Fabric, FabricParams
from .hashing import prf
from .protocol import ENDPOINTS, adjudicate, countersign
from .protocol.codec import HEADER, HEADER_SIZE, MAC_SIZE, MsgType, SignDoc, decode_frame, encode_frame
from .protocol.session import AliceConfig, BobConfig, Endpoint, Failure, SessionFailed
from .stack import empty_stack, push, truncate, verify_full

PROTOCOL_NAMES = tuple(ENDPOINTS)
FAULT_SCENARIOS = ("tamper-document", "tamper-tau", "replay-round", "bob-substack-claim",
                   "alice-alt-stack-claim", "forge-rws-signature")

#: Sees every frame a party puts on the wire; returns the frames to transmit instead.
Interceptor = Callable[[str, bytes], Optional[list[bytes]]]


@dataclass(frozen=True)
class ChannelConfig:
    drop_prob: float = 0.0
    corrupt_prob: float = 0.0
    rng_seed: int = 0
    max_retx: int = 16
    latency_ticks: int = 1
    #: Per-bit error rate; a frame of n bytes is damaged with probability 1-(1-ber)^(8n).
    bit_error_rate: float = 0.0
    #: Retransmission timeout; defaults to one round trip plus one tick.
    timeout_ticks: Optional[int] = None

    def __post_init__(self):
        for name in ("drop_prob", "corrupt_prob", "bit_error_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.max_retx < 0:
            raise ValueError("max_retx must be >= 0")
        if self.latency_ticks < 1:
            raise ValueError("latency_ticks must be >= 1")
        if self.timeout_ticks is not None and self.timeout_ticks <= 2 * self.latency_ticks:
            raise ValueError("timeout_ticks must exceed the round-trip time")

    @property
    def timeout(self) -> int:
        return self.timeout_ticks if self.timeout_ticks is not None else 2 * self.latency_ticks + 1


@dataclass(frozen=True)
class SessionParams:
    w: int
    N: int
    kappa: int
    #: Acknowledgement chain length; ``None`` sizes it to the session.
    L: Optional[int] = None
    phi: int = 1
    seed: int = 0
    mac_key: Optional[bytes] = None
    per_element: bool = False

    def with_L_for(self, protocol: str, rounds: int) -> "SessionParams":
        need = required_L(protocol, rounds)
        if self.L is None or self.L < need:
            return replace(self, L=need)
        return self


PROFILES = {
    "toy": SessionParams(w=8, N=32, kappa=3, L=8),
    "paper": SessionParams(w=4096, N=8192, kappa=31, L=1_000_000, phi=64),
    # small but with about 33 bits against family collisions, so a tampered
    # document is not accepted by chance the way it can be at toy size
    "fault": SessionParams(w=64, N=64, kappa=8, L=16),
}


def required_L(protocol: str, rounds: int) -> int:
    """Shortest acknowledgement chain covering the invitation plus ``rounds`` rounds."""
    acks = 1 + (2 * rounds if protocol == "maws" else rounds)
    return acks + 1


def session_pushes(protocol: str, rounds: int) -> int:
    return 1 + (2 * rounds if protocol == "maws" else rounds)


def derive_secrets(seed: int) -> tuple[bytes, bytes, bytes]:
    """Fabric master seed, acknowledgement seed and session id for a session seed."""
    root = hashlib.sha256(b"wstack-session" + struct.pack(">Q", seed & (2**64 - 1))).digest()
    return prf(root, b"fabric-master"), prf(root, b"ack-master"), prf(root, b"session-id")[:16]


def make_documents(n: int, seed: int = 0) -> list[bytes]:
    """``n`` random 32-byte document digests (each stands for a nonce-carrying document)."""
    rng = random.Random(seed)
    return [rng.randbytes(32) for _ in range(n)]


class Transcript:
    """Ordered event records; serialized as JSON lines."""

    def __init__(self, events: Optional[list[dict]] = None):
        self.events: list[dict] = events if events is not None else []

    def record(self, **event) -> None:
        self.events.append(event)

    def __iter__(self) -> Iterator[dict]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["event"] == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path: Union[str, Path]) -> "Transcript":
        return cls([json.loads(line) for line in Path(path).read_text().splitlines() if line])


def _frame_info(raw: bytes) -> tuple[str, int]:
    if len(raw) < HEADER_SIZE:
        return "?", -1
    t, _, round_ = HEADER.unpack_from(raw)
    try:
        return MsgType(t).name, round_
    except ValueError:
        return f"0x{t:02x}", round_


@dataclass
class SessionResult:
    protocol: str
    params: SessionParams
    channel: ChannelConfig
    transcript: Transcript
    alice: Endpoint
    bob: Endpoint
    documents: list[bytes]
    rounds: int
    ticks: int
    failure: Optional[SessionFailed] = None
    #: Transcript indices of damaged deliveries that changed the receiver's state.
    unsafe: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def stacks_equal(self) -> bool:
        return self.bob.stack is not None and self.alice.stack.to_bytes() == self.bob.stack.to_bytes()

    def verify(self) -> bool:
        s = self.alice.stack
        return verify_full(self.alice.edge, s.documents, s.top, s.kappa)


class _Channel:
    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.rng_seed)

    def transmit(self, raw: bytes) -> tuple[str, bytes]:
        cfg = self.cfg
        rng = self.rng
        if cfg.drop_prob and rng.random() < cfg.drop_prob:
            return "drop", raw
        damaged = bool(cfg.corrupt_prob) and rng.random() < cfg.corrupt_prob
        if not damaged and cfg.bit_error_rate:
            damaged = rng.random() >= (1.0 - cfg.bit_error_rate) ** (8 * len(raw))
        if damaged:
            bit = rng.randrange(8 * len(raw))
            buf = bytearray(raw)
            buf[bit // 8] ^= 0x80 >> (bit % 8)
            return "corrupt", bytes(buf)
        return "deliver", raw


class _Driver:
    def __init__(self, protocol: str, alice: Endpoint, bob: Endpoint, documents: Sequence[bytes],
                 channel: ChannelConfig, interceptor: Optional[Interceptor], workers: int):
        self.protocol = protocol
        self.alice = alice
        self.bob = bob
        self.parties = {"alice": alice, "bob": bob}
        self.peer = {"alice": "bob", "bob": "alice"}
        self.signer = bob if protocol == "rws" else alice
        self.documents = list(documents)
        self.next_doc = 0
        self.cfg = channel
        self.channel = _Channel(channel)
        self.interceptor = interceptor
        self.transcript = Transcript()
        self.queue: list[tuple[int, int, str, str, object]] = []
        self.seq = 0
        self.now = 0
        self.armed = {"alice": -1, "bob": -1}
        self.unsafe: list[int] = []
        self.keyed = alice.keyed
        self._pools = ({name: ThreadPoolExecutor(max_workers=1, thread_name_prefix=name) for name in self.parties}
                       if workers > 1 else None)

    def _call(self, name: str, fn, *args):
        if self._pools is None:
            return fn(*args)
        return self._pools[name].submit(fn, *args).result()

    def close(self) -> None:
        if self._pools is not None:
            for pool in self._pools.values():
                pool.shutdown()

    def _schedule(self, t: int, kind: str, target: str, payload: object) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (t, self.seq, kind, target, payload))

    def _payload(self, raw: bytes) -> int:
        return len(raw) - HEADER_SIZE - (MAC_SIZE if self.keyed else 0)

    def emit(self, sender: str, frames: Iterable[bytes]) -> None:
        for raw in frames:
            out = [raw]
            if self.interceptor is not None:
                replaced = self.interceptor(sender, raw)
                if replaced is not None:
                    out = replaced
                    self.transcript.record(t=self.now, event="tamper", src=sender, original=raw.hex(),
                                           frames=[r.hex() for r in replaced])
            for frame in out:
                self._transmit(sender, frame, tampered=frame != raw)
        ep = self.parties[sender]
        if ep.pending is not None and self.armed[sender] != ep.pending_seq:
            self.armed[sender] = ep.pending_seq
            self._schedule(self.now + self.cfg.timeout, "timer", sender, ep.pending_seq)

    def _transmit(self, sender: str, raw: bytes, tampered: bool) -> None:
        name, round_ = _frame_info(raw)
        dst = self.peer[sender]
        self.transcript.record(t=self.now, event="send", src=sender, dst=dst, round=round_, type=name,
                               len=len(raw), payload=self._payload(raw), hex=raw.hex())
        fate, wire = self.channel.transmit(raw)
        if fate == "drop":
            self.transcript.record(t=self.now, event="drop", src=sender, dst=dst, round=round_, type=name)
            return
        if fate == "corrupt":
            self.transcript.record(t=self.now, event="corrupt", src=sender, dst=dst, round=round_, type=name,
                                   hex=wire.hex())
        self._schedule(self.now + self.cfg.latency_ticks, "deliver", dst,
                       (wire, tampered or fate == "corrupt", name, round_))

    def out_of_band(self) -> None:
        for raw in self.alice.start():
            self._oob("alice", raw)

    def _oob(self, sender: str, raw: bytes) -> None:
        name, round_ = _frame_info(raw)
        dst = self.peer[sender]
        self.transcript.record(t=self.now, event="oob", src=sender, dst=dst, round=round_, type=name, len=len(raw))
        target = self.parties[dst]
        replies = self._call(dst, target.receive, raw)
        for reply in replies:
            if _frame_info(reply)[0] in ("INVITE", "EDGE", "BOBKEY"):
                self._oob(dst, reply)
            else:
                self.emit(dst, [reply])
        if not replies:
            self.emit(dst, [])

    def _can_sign(self) -> bool:
        s = self.signer
        return (s.phase == "ready" and s.pending is None and s.stack is not None and s.stack.depth >= 1
                and self.next_doc < len(self.documents))

    def _finished(self) -> bool:
        return (self.next_doc == len(self.documents) and self.alice.done and self.bob.done
                and self.alice.stack.depth >= 1)

    def _maybe_sign(self) -> None:
        while self._can_sign():
            doc = self.documents[self.next_doc]
            self.next_doc += 1
            who = "bob" if self.signer is self.bob else "alice"
            self.transcript.record(t=self.now, event="sign", party=who, index=self.next_doc, document=doc.hex())
            self.emit(who, self._call(who, self.signer.sign, doc))

    def _state(self, name: str, before: str) -> None:
        ep = self.parties[name]
        if ep.phase != before:
            depth = ep.stack.depth if ep.stack is not None else 0
            self.transcript.record(t=self.now, event="state", party=name, phase=ep.phase, depth=depth)

    def run(self) -> Optional[SessionFailed]:
        try:
            self.out_of_band()
            self._maybe_sign()
            while not self._finished():
                if not self.queue:
                    raise SessionFailed(Failure.DOS, "session stalled with nothing in flight")
                t, _, kind, target, payload = heapq.heappop(self.queue)
                self.now = t
                ep = self.parties[target]
                before = ep.phase
                if kind == "timer":
                    if ep.pending is None or ep.pending_seq != payload:
                        continue
                    self.transcript.record(t=t, event="timeout", party=target, retx=ep.retx + 1)
                    self.emit(target, self._call(target, ep.on_timeout))
                else:
                    wire, damaged, name, round_ = payload
                    self.transcript.record(t=t, event="deliver", src=self.peer[target], dst=target, round=round_,
                                           type=name, damaged=damaged)
                    digest = ep.state_digest() if damaged else None
                    replies = self._call(target, ep.receive, wire)
                    if damaged and ep.state_digest() != digest:
                        self.unsafe.append(len(self.transcript) - 1)
                    self.emit(target, replies)
                self._state(target, before)
                self._maybe_sign()
        except SessionFailed as exc:
            self.transcript.record(t=self.now, event="failure", reason=exc.reason.value, detail=exc.detail)
            return exc
        finally:
            self.close()
        self.transcript.record(t=self.now, event="complete", rounds=self.next_doc)
        return None


def build_endpoints(protocol: str, params: SessionParams, channel: ChannelConfig, *,
                    fabric: Optional[Fabric] = None, ack_seed: Optional[bytes] = None,
                    session_id: Optional[bytes] = None, approve: Optional[Callable[[bytes], bool]] = None,
                    alice_cls=None, bob_cls=None) -> tuple[Endpoint, Endpoint]:
    if protocol not in ENDPOINTS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {', '.join(PROTOCOL_NAMES)}")
    if params.L is None:
        raise ValueError("the acknowledgement chain length L must be set")
    master, ack, sid = derive_secrets(params.seed)
    if fabric is None:
        fabric = Fabric.generate(master, FabricParams(params.w, params.N, params.phi))
    a_cls, b_cls = ENDPOINTS[protocol]
    alice = (alice_cls or a_cls)(AliceConfig(fabric, params.kappa, params.L, session_id or sid, params.mac_key,
                                             channel.max_retx, params.per_element))
    bob = (bob_cls or b_cls)(BobConfig(ack_seed or ack, params.kappa, session_id or sid, params.mac_key,
                                       channel.max_retx, approve))
    return alice, bob


def run_session(protocol: str, params: SessionParams, documents: Sequence[bytes],
                channel: ChannelConfig = ChannelConfig(), *, fabric: Optional[Fabric] = None,
                ack_seed: Optional[bytes] = None, approve: Optional[Callable[[bytes], bool]] = None,
                interceptor: Optional[Interceptor] = None, workers: int = 1,
                alice_cls=None, bob_cls=None) -> SessionResult:
    """Drive both endpoints until every document is signed or the session fails.

    ``params.L`` is raised to :func:`required_L` if it is too short. Raises
    ``ValueError`` when the fabric cannot be expected to hold the session.
    """
    params = params.with_L_for(protocol, len(documents))
    if fabric is not None:
        params = replace(params, w=fabric.w, N=fabric.N, phi=fabric.params.phi)
    pushes = session_pushes(protocol, len(documents))
    if pushes > capacity(params.w, params.N, params.kappa).d_max:
        raise ValueError(f"{pushes} stack pushes exceed the fabric capacity "
                         f"{capacity(params.w, params.N, params.kappa).d_max}")
    alice, bob = build_endpoints(protocol, params, channel, fabric=fabric, ack_seed=ack_seed, approve=approve,
                                 alice_cls=alice_cls, bob_cls=bob_cls)
    driver = _Driver(protocol, alice, bob, documents, channel, interceptor, workers)
    failure = driver.run()
    return SessionResult(protocol, params, channel, driver.transcript, alice, bob, list(documents),
                         driver.next_doc, driver.now, failure, driver.unsafe)


@dataclass(frozen=True)
class PartyStats:
    frames: int
    bytes: int
    payload: int


@dataclass(frozen=True)
class WireStats:
    alice: PartyStats
    bob: PartyStats
    #: round -> {"alice": payload bytes, "bob": payload bytes}
    per_round: dict[int, dict[str, int]]

    def party(self, name: str) -> PartyStats:
        return getattr(self, name)


def wire_stats(transcript: Transcript, distinct: bool = False) -> WireStats:
    """Bytes each party put on the channel, retransmissions included.

    With ``distinct`` every frame counts once however often it was resent,
    which gives the protocol's own message sizes on a lossy run.
    """
    totals = {"alice": [0, 0, 0], "bob": [0, 0, 0]}
    per_round: dict[int, dict[str, int]] = {}
    seen: set[str] = set()
    for e in transcript.of("send"):
        if distinct:
            if e["hex"] in seen:
                continue
            seen.add(e["hex"])
        t = totals[e["src"]]
        t[0] += 1
        t[1] += e["len"]
        t[2] += e["payload"]
        slot = per_round.setdefault(e["round"], {"alice": 0, "bob": 0})
        slot[e["src"]] += e["payload"]
    return WireStats(PartyStats(*totals["alice"]), PartyStats(*totals["bob"]), dict(sorted(per_round.items())))


@dataclass
class FaultReport:
    scenario: str
    seed: int
    passed: bool
    outcome: str
    transcript: Transcript
    verdict: object = None
    details: dict = field(default_factory=dict)


def _rewrite_signdoc(raw: bytes, round_: int, change: Callable[[SignDoc], SignDoc]) -> Optional[list[bytes]]:
    name, r = _frame_info(raw)
    if name != "SIGNDOC" or r != round_:
        return None
    frame = decode_frame(raw)
    return [encode_frame(frame.session_id, r, change(frame.body))]


def _once(fn: Interceptor) -> Interceptor:
    fired = [False]

    def hook(sender: str, raw: bytes) -> Optional[list[bytes]]:
        if fired[0]:
            return None
        out = fn(sender, raw)
        if out is not None:
            fired[0] = True
        return out
    return hook


def inject_fault(scenario: str, seed: int = 0, rounds: int = 10, params: Optional[SessionParams] = None) -> FaultReport:
    """Run one adversarial scenario and check that it ends the prescribed way."""
    if scenario not in FAULT_SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {', '.join(FAULT_SCENARIOS)}")
    params = replace(params or PROFILES["fault"], seed=seed)
    docs = make_documents(rounds, seed)
    rng = random.Random(seed)
    if rounds < 2:
        raise ValueError("fault scenarios need at least 2 rounds")
    # a round with a successor, so a replay has something to precede
    target_round = 2 + rng.randrange(rounds - 1)

    if scenario in ("tamper-document", "tamper-tau", "replay-round"):
        if scenario == "tamper-document":
            def change(body: SignDoc) -> SignDoc:
                doc = bytearray(body.document)
                doc[rng.randrange(len(doc))] ^= 1 << rng.randrange(8)
                return SignDoc(bytes(doc), body.tau)
        elif scenario == "tamper-tau":
            def change(body: SignDoc) -> SignDoc:
                tau = dict(body.tau)
                tau[rng.choice(sorted(tau))] = rng.randbytes(32)
                return SignDoc(body.document, tau)
        seen: list[bytes] = []

        def hook(sender: str, raw: bytes) -> Optional[list[bytes]]:
            if sender != "alice":
                return None
            if scenario != "replay-round":
                return _rewrite_signdoc(raw, target_round, change)
            name, r = _frame_info(raw)
            if name == "SIGNDOC" and r == target_round:
                seen.append(raw)
                return None
            if name == "SIGNDOC" and r == target_round + 1 and seen:
                # re-inject the already acknowledged round ahead of the new one
                return [seen[0], raw]
            return None

        base = ChannelConfig(rng_seed=seed)
        res = run_session("bws", params, docs, base, interceptor=_once(hook))
        damaged = [i for i, e in enumerate(res.transcript) if e["event"] == "deliver" and e["damaged"]]
        ok = res.ok and res.stacks_equal and res.verify() and not res.unsafe and bool(damaged)
        ok = ok and list(res.bob.stack.documents[1:]) == docs
        details = {"target_round": target_round, "damaged_deliveries": len(damaged)}
        if scenario == "replay-round":
            acks = [e["hex"] for e in res.transcript.of("send") if e["type"] == "ACK" and e["round"] == target_round]
            details["ack_resends"] = len(acks) - 1
            ok = ok and len(acks) >= 2 and len(set(acks)) == 1
            outcome = "replay answered with the previous acknowledgement; depth unchanged"
        elif len(res.bob.stack.documents) > target_round - 1 and \
                res.bob.stack.documents[target_round - 1] != docs[target_round - 2]:
            outcome = "tampered document accepted: its family collides with the original at these parameters"
        else:
            outcome = "tampered round rejected; retransmission accepted"
        if not ok and not outcome.startswith("tampered document accepted"):
            outcome = "unexpected outcome"
        return FaultReport(scenario, seed, ok, outcome, res.transcript,
                           details=details)

    protocol = "rws" if scenario == "forge-rws-signature" else "bws"
    res = run_session(protocol, params, docs, ChannelConfig(rng_seed=seed))
    if not res.ok:
        return FaultReport(scenario, seed, False, f"honest session failed: {res.failure}", res.transcript)
    alice, bob = res.alice, res.bob
    edge, Q, L = alice.edge, alice.Q, alice.L

    if scenario == "bob-substack-claim":
        # Bob hides the rounds after j_B and hands over a matching older acknowledgement
        j_b = 1 + rng.randrange(rounds)
        shallow = truncate(bob.stack, j_b)
        fake_q = bob.chain[L - 1 - j_b]
        verdict = adjudicate(edge, Q, L, alice.q_last, shallow, "bws", bob_q=fake_q)
        ok = (not verdict.accepted and verdict.reason.startswith("verifier evidence rejected")
              and verdict.depth == alice.acked == rounds + 1)
        return FaultReport(scenario, seed, ok, "bob's shallow stack rejected at alice's depth" if ok else
                           "unexpected verdict", res.transcript, verdict, {"j_b": j_b, "j_a": verdict.j_alice})

    if scenario == "alice-alt-stack-claim":
        # Alice re-signs different documents at the same depth on her own fabric
        alt = push(alice.stack.documents[0], empty_stack(edge, alice.params), alice.fabric)
        for doc in make_documents(rounds, seed + 10_000):
            alt = push(doc, alt, alice.fabric)
        alt_valid = verify_full(edge, alt.documents, alt.top, alt.kappa)
        verdict = adjudicate(edge, Q, L, alice.q_last, bob.stack, "bws", bob_q=bob.chain.last_revealed,
                             alice_stack=alt)
        ok = (alt_valid and alt.depth == bob.stack.depth and verdict.accepted
              and [e.document for e in verdict.entries] == list(bob.stack.documents)
              and any("alternative stack disregarded" in a for a in verdict.anomalies))
        return FaultReport(scenario, seed, ok, "dispute resolved in favour of bob's valid stack" if ok else
                           "unexpected verdict", res.transcript, verdict, {"alt_valid": alt_valid})

    # forge-rws-signature: Alice claims Bob signed a document he never sent
    forged = rng.randbytes(32)
    guess = rng.randbytes(32)
    fake = push(countersign(forged, guess), alice.stack, alice.fabric)
    verdict = adjudicate(edge, Q, L, alice.q_last, None, "rws", alice_stack=fake,
                         claims=[forged] + list(bob.audit_log.values()))
    genuine = {p: verdict.claims[d] for p, d in bob.audit_log.items()}
    ok = verdict.accepted and verdict.claims[forged] is None and all(p == q for p, q in genuine.items())
    return FaultReport(scenario, seed, ok, "forged signature matches no round; genuine ones located" if ok else
                       "unexpected verdict", res.transcript, verdict, {"genuine": genuine})


# -- scenario files ---------------------------------------------------------

_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


@dataclass(frozen=True)
class Scenario:
    protocol: str = "bws"
    profile: str = "toy"
    w: Optional[int] = None
    N: Optional[int] = None
    kappa: Optional[int] = None
    L: Optional[int] = None
    phi: Optional[int] = None
    seed: int = 0
    rounds: int = 10
    drop: float = 0.0
    corrupt: float = 0.0
    ber: float = 0.0
    max_retx: int = 16
    latency: int = 1
    mac: Optional[str] = None
    per_element: bool = False
    refuse: tuple[int, ...] = ()
    fault: Optional[str] = None

    def session_params(self) -> SessionParams:
        base = PROFILES[self.profile]
        over = {k: getattr(self, k) for k in ("w", "N", "kappa", "L", "phi") if getattr(self, k) is not None}
        mac_key = None
        if self.mac is not None:
            mac_key = bytes.fromhex(self.mac) if self.mac not in _BOOL else (
                hashlib.sha256(b"wstack-mac" + struct.pack(">Q", self.seed)).digest() if _BOOL[self.mac] else None)
        return replace(base, **over, seed=self.seed, mac_key=mac_key, per_element=self.per_element)

    def channel(self) -> ChannelConfig:
        return ChannelConfig(self.drop, self.corrupt, self.seed, self.max_retx, self.latency, self.ber)


def parse_scenario(text: str) -> Scenario:
    """``key=value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(Scenario)}
    values: dict[str, object] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip().replace("-", "_"), raw.strip()
        if not sep or key not in known:
            raise ValueError(f"line {n}: expected key=value with a known key, got {line!r}")
        if key == "refuse":
            values[key] = tuple(int(x) for x in raw.split(",") if x.strip())
        elif key in ("protocol", "profile", "mac", "fault"):
            values[key] = raw
        elif key == "per_element":
            values[key] = _BOOL[raw.lower()]
        elif key in ("drop", "corrupt", "ber"):
            values[key] = float(raw)
        else:
            values[key] = int(raw)
    sc = Scenario(**values)
    if sc.protocol not in PROTOCOL_NAMES:
        raise ValueError(f"unknown protocol {sc.protocol!r}")
    if sc.profile not in PROFILES:
        raise ValueError(f"unknown profile {sc.profile!r}")
    if sc.fault is not None and sc.fault not in FAULT_SCENARIOS:
        raise ValueError(f"unknown fault scenario {sc.fault!r}")
    return sc


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text())


def refusal_policy(documents: Sequence[bytes], refuse: Iterable[int]) -> Callable[[bytes], bool]:
    """Bob approves every document except those at the given 1-based round numbers."""
    refused = {documents[i - 1] for i in refuse}
    return lambda doc: doc not in refused


def run_scenario(sc: Scenario) -> Union[SessionResult, FaultReport]:
    if sc.fault is not None:
        return inject_fault(sc.fault, sc.seed, sc.rounds)
    docs = make_documents(sc.rounds, sc.seed)
    approve = refusal_policy(docs, sc.refuse) if sc.refuse else None
    return run_session(sc.protocol, sc.session_params(), docs, sc.channel(), approve=approve)


def liveness_rate(protocol: str, params: SessionParams, rounds: int, channel: ChannelConfig, runs: int,
                  first_seed: int = 0) -> float:
    """Fraction of seeded sessions that complete."""
    docs = make_documents(rounds, first_seed)
    fabric = None
    completed = 0
    for i in range(runs):
        res = run_session(protocol, params, docs, replace(channel, rng_seed=first_seed + i), fabric=fabric)
        fabric = res.alice.fabric
        completed += res.ok
    return completed / runs


def drop_budget(drop_prob: float, max_retx: int, rounds: int) -> float:
    """Probability that no round of a session exhausts its retransmissions.

    A round trip survives with ``(1 - p)^2``; a round fails after
    ``max_retx + 1`` consecutive losses.
    """
    lost = 1.0 - (1.0 - drop_prob) ** 2
    return (1.0 - lost ** (max_retx + 1)) ** rounds if rounds else 1.0

