"""Endpoint machinery shared by the BWS, MAWS and RWS state machines.

Endpoints are event driven: the driver feeds them raw frames with
:meth:`Endpoint.receive` and retransmission timeouts with
:meth:`Endpoint.on_timeout`; both return the frames to put on the wire.
An endpoint never touches the channel itself.

All three protocols share the same start-up: Alice sends INVITE(L) and her
edge, Bob answers with his chain key Q (these travel out of band), then
Alice signs the invitation document ``L || Q`` as round 1 over the channel.

Round numbers on the wire are stack depths: the frame that carries the
document at 0-based position ``p`` is sent as round ``p + 1``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Callable, ClassVar, Optional

from ..fabric import Edge, Fabric
from ..oracle import OracleParams
from ..stack import (CapacityExhausted, SignatureStack, apply_extension, empty_stack, family_diff, push,
                     validate_extension)
from .ackchain import AckChain, ack_verify
from .codec import (Ack, BobKey, Body, CodecError, EdgeAnnounce, Frame, Invite, MacError, Nak, SignDoc,
                    decode_frame, encode_frame)

DEFAULT_MAX_RETX = 16


class Failure(str, Enum):
    DOS = "dos"
    CAPACITY = "capacity"
    MAC = "mac"
    VALIDATION = "validation"


class SessionFailed(Exception):
    def __init__(self, reason: Failure, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


def invitation_document(L: int, Q: bytes) -> bytes:
    """The first document of every session: ``L`` as u32 followed by Bob's key."""
    return struct.pack(">I", L) + Q


@dataclass
class AliceConfig:
    fabric: Fabric
    kappa: int
    L: int
    session_id: bytes
    mac_key: Optional[bytes] = None
    max_retx: int = DEFAULT_MAX_RETX
    per_element: bool = False


@dataclass
class BobConfig:
    ack_seed: bytes
    kappa: int
    session_id: bytes
    mac_key: Optional[bytes] = None
    max_retx: int = DEFAULT_MAX_RETX
    #: MAWS only: decides whether Bob countersigns a document.
    approve: Optional[Callable[[bytes], bool]] = None


class Endpoint:
    """Frame decoding, retransmission bookkeeping and state fingerprints."""

    role: ClassVar[str] = "?"
    #: Treat malformed or foreign frames as protocol violations (RWS).
    strict: ClassVar[bool] = False

    def __init__(self, session_id: bytes, mac_key: Optional[bytes], max_retx: int):
        self.session_id = session_id
        self.mac_key = mac_key
        self.max_retx = max_retx
        self.phase = "init"
        self.pending: Optional[bytes] = None
        self.pending_seq = 0
        self.retx = 0
        self.mac_rejects = 0
        self.malformed = 0
        self.ignored = 0
        self._mac_streak = 0

    @property
    def keyed(self) -> bool:
        return self.mac_key is not None

    @property
    def awaiting(self) -> bool:
        return self.pending is not None

    @property
    def done(self) -> bool:
        return self.phase == "ready" and self.pending is None

    def receive(self, raw: bytes) -> list[bytes]:
        try:
            frame = decode_frame(raw, self.mac_key)
        except MacError:
            # forged or damaged frames are dropped unseen
            self.mac_rejects += 1
            self._mac_streak += 1
            return []
        except CodecError as exc:
            self.malformed += 1
            if self.strict:
                raise SessionFailed(Failure.VALIDATION, f"{self.role}: malformed frame: {exc}") from None
            return []
        self._mac_streak = 0
        if frame.session_id != self.session_id:
            self.malformed += 1
            if self.strict:
                raise SessionFailed(Failure.VALIDATION, f"{self.role}: frame for another session")
            return []
        handler = getattr(self, "_on_" + frame.msg_type.name.lower(), None)
        if handler is None:
            return self._ignore()
        return handler(frame)

    def on_timeout(self) -> list[bytes]:
        """Retransmission timer expired: re-send the outstanding frame."""
        if self.pending is None:
            return []
        return self._retransmit()

    def _ignore(self) -> list[bytes]:
        self.ignored += 1
        return []

    def _frame(self, round_: int, body: Body) -> bytes:
        return encode_frame(self.session_id, round_, body, self.mac_key)

    def _send(self, round_: int, body: Body) -> list[bytes]:
        """Send a frame that expects a reply; arms the retransmission timer."""
        raw = self._frame(round_, body)
        self.pending = raw
        self.pending_seq += 1
        self.retx = 0
        return [raw]

    def _reply(self, round_: int, body: Body) -> list[bytes]:
        """Send a frame that needs no reply of its own."""
        return [self._frame(round_, body)]

    def _settle(self) -> None:
        self.pending = None
        self.pending_seq += 1

    def _retransmit(self) -> list[bytes]:
        if self.pending is None:
            return []
        self.retx += 1
        if self.retx > self.max_retx:
            if self._mac_streak:
                raise SessionFailed(Failure.MAC, f"{self.role}: every reply failed MAC verification")
            raise SessionFailed(Failure.DOS, f"{self.role}: no valid reply after {self.max_retx} retransmissions")
        self.pending_seq += 1
        return [self.pending]

    def _nak(self, round_: int) -> list[bytes]:
        # without a MAC key a NAK is indistinguishable from injected noise,
        # so the sender's timeout stands in for it
        if not self.keyed:
            return []
        return self._reply(round_, Nak(round_))

    def _state_parts(self) -> list[bytes]:
        return [self.phase.encode()]

    def state_digest(self) -> bytes:
        """Fingerprint of protocol state (retransmission counters excluded)."""
        h = hashlib.sha256()
        for part in self._state_parts():
            h.update(struct.pack(">I", len(part)))
            h.update(part)
        return h.digest()


class Signer(Endpoint):
    """The fabric holder (Alice) in every protocol."""

    role = "alice"

    def __init__(self, cfg: AliceConfig):
        super().__init__(cfg.session_id, cfg.mac_key, cfg.max_retx)
        self.fabric = cfg.fabric
        self.params = OracleParams(cfg.fabric.w, cfg.kappa)
        self.L = cfg.L
        self.stack: SignatureStack = empty_stack(cfg.fabric.edge(), self.params)
        self.Q: Optional[bytes] = None
        self.q_last: Optional[bytes] = None
        self.acked = 0
        self.last_tau: dict[int, bytes] = {}

    @property
    def edge(self) -> Edge:
        return self.fabric.edge()

    def start(self) -> list[bytes]:
        """Key-setup frames (INVITE, EDGE), to be delivered out of band."""
        return [self._frame(0, Invite(self.L)), self._frame(0, EdgeAnnounce(self.edge))]

    def _push(self, doc: bytes) -> dict[int, bytes]:
        before = self.stack
        try:
            self.stack = push(doc, before, self.fabric)
        except CapacityExhausted as exc:
            raise SessionFailed(Failure.CAPACITY, str(exc)) from None
        self.last_tau = family_diff(self.stack.top, before.top)
        return self.last_tau

    def _check_ack_headroom(self, needed: int) -> None:
        if self.acked + needed > self.L - 1:
            raise SessionFailed(Failure.CAPACITY, "acknowledgement chain exhausted")

    def _check_ready(self) -> None:
        if self.phase != "ready" or self.pending is not None:
            raise RuntimeError(f"{self.role} cannot start a round in phase {self.phase!r}")

    def _accept_ack(self, q: bytes) -> bool:
        if ack_verify(q, self.q_last, 1) != 1:
            return False
        self.q_last = q
        self.acked += 1
        return True

    def _on_bobkey(self, frame: Frame) -> list[bytes]:
        if self.phase != "init":
            return self._ignore()
        self.Q = frame.body.Q
        self.q_last = self.Q
        doc = invitation_document(self.L, self.Q)
        tau = self._push(doc)
        self.phase = "await_ack"
        return self._send(1, SignDoc(doc, tau))

    def _bad_reply(self) -> list[bytes]:
        """An invalid acknowledgement counts as a NAK: send the round again."""
        return self._retransmit()

    def _on_ack(self, frame: Frame) -> list[bytes]:
        if self.phase != "await_ack" or frame.round != self.stack.depth:
            return self._ignore()
        q = frame.body.q
        if q == self.q_last:
            # a late copy of an acknowledgement already accepted
            return self._ignore()
        if not self._accept_ack(q):
            return self._bad_reply()
        self._settle()
        self.phase = "ready"
        return []

    def _on_nak(self, frame: Frame) -> list[bytes]:
        if self.pending is None or frame.round != self.stack.depth:
            return self._ignore()
        return self._retransmit()

    def _state_parts(self) -> list[bytes]:
        return super()._state_parts() + [self.stack.to_bytes(), self.q_last or b"", struct.pack(">I", self.acked)]


class Verifier(Endpoint):
    """The acknowledgement-chain holder (Bob); keeps a fabric-less stack replica."""

    role = "bob"

    def __init__(self, cfg: BobConfig):
        super().__init__(cfg.session_id, cfg.mac_key, cfg.max_retx)
        self.kappa = cfg.kappa
        self.ack_seed = cfg.ack_seed
        self.chain: Optional[AckChain] = None
        self.edge: Optional[Edge] = None
        self.stack: Optional[SignatureStack] = None
        self.L: Optional[int] = None
        self.last_response: Optional[bytes] = None

    @property
    def Q(self) -> bytes:
        return self.chain.Q

    def _on_invite(self, frame: Frame) -> list[bytes]:
        if self.phase != "init":
            return self._ignore()
        self.L = frame.body.L
        self.chain = AckChain(self.ack_seed, self.L)
        return []

    def _on_edge(self, frame: Frame) -> list[bytes]:
        if self.phase != "init" or self.chain is None:
            return self._ignore()
        self.edge = frame.body.edge
        self.stack = empty_stack(self.edge, OracleParams(self.edge.w, self.kappa))
        self.phase = "ready"
        return [self._frame(0, BobKey(self.Q))]

    def _reveal(self) -> bytes:
        try:
            return self.chain.reveal_next()
        except IndexError:
            raise SessionFailed(Failure.CAPACITY, "acknowledgement chain exhausted") from None

    def _check_chain_headroom(self, needed: int) -> None:
        if self.chain.remaining < needed:
            raise SessionFailed(Failure.CAPACITY, "acknowledgement chain exhausted")

    def _respond(self, round_: int, body: Body, expect_reply: bool = False) -> list[bytes]:
        out = self._send(round_, body) if expect_reply else self._reply(round_, body)
        self.last_response = out[0]
        return out

    def _resend_last(self) -> list[bytes]:
        return [self.last_response] if self.last_response is not None else []

    def _invitation(self) -> bytes:
        return invitation_document(self.L, self.Q)

    def _accepts_document(self, depth: int) -> bool:
        """Whether a fresh SIGNDOC is expected when the replica holds ``depth`` documents."""
        return self.phase == "ready"

    def _round_tau(self, frame: Frame) -> dict[int, bytes]:
        return dict(frame.body.tau)

    def _on_signdoc(self, frame: Frame) -> list[bytes]:
        if self.stack is None:
            return self._ignore()
        s = self.stack
        doc = frame.body.document
        if s.depth and frame.round == s.depth and doc == s.documents[-1]:
            # Alice missed our reply to this round
            return self._resend_last()
        if frame.round != s.depth + 1 or not self._accepts_document(s.depth):
            return self._ignore()
        # Bob checks the invitation against his own copy of L || Q
        if s.depth == 0 and doc != self._invitation():
            return self._nak(frame.round)
        tau = self._round_tau(frame)
        if not validate_extension(doc, tau, s):
            return self._nak(frame.round)
        self.stack = apply_extension(s, doc, tau)
        return self._document_accepted(frame.round, doc)

    def _document_accepted(self, round_: int, doc: bytes) -> list[bytes]:
        self._check_chain_headroom(1)
        return self._respond(round_, Ack(self._reveal()))

    def _state_parts(self) -> list[bytes]:
        parts = super()._state_parts()
        parts.append(self.stack.to_bytes() if self.stack is not None else b"")
        parts.append(struct.pack(">i", self.chain.cursor if self.chain is not None else -1))
        return parts
